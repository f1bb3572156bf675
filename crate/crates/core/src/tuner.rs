//! Single-parameter tuning: find every meta parameter whose change can
//! enforce a constraint on posteriors, and the smallest change that does.
//!
//! Every joint probability `Pr(i)` is affine in a meta parameter `τ`, with
//! slope `α_i = Pr(i, x, u)/θ(x|u) − Pr(i, x̄, u)/θ(x̄|u)`. Multiplying a
//! posterior constraint through by `Pr(e)` turns it into a linear inequality
//! in the change `δ`:
//!
//! ```text
//! C ≥ δ·k
//! ```
//!
//! where `C` is the current margin in joint space and `k` collects the slopes.
//! Three family-marginal passes (over `e`, `y,e` and `z,e`) give `C` and `k`
//! for all parameters at once.

use std::cmp::Ordering;
use std::fmt;

use serde::Serialize;

use crate::bounds;
use crate::engine::{self, FamilyMarginals};
use crate::error::{Error, Result};
use crate::instantiation::{Event, Evidence, Instantiation};
use crate::network::{is_tunable, MetaParameterRef, Network, ParamLocation};

/// Slack below which [`verify`] still reports a constraint as satisfied.
pub const VERIFY_TOLERANCE: f64 = 1e-9;

/// Relative size of `k` under which a parameter counts as irrelevant.
const IRRELEVANCE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConstraintKind {
    /// `Pr(y|e) − Pr(z|e) ≥ ε`
    Difference,
    /// `Pr(y|e) / Pr(z|e) ≥ ε`
    Ratio,
    /// `Pr(y|e) ≥ ε`
    AtLeast,
    /// `Pr(y|e) ≤ ε`
    AtMost,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constraint {
    kind: ConstraintKind,
    y: Event,
    z: Option<Event>,
    epsilon: f64,
}

impl Constraint {
    pub fn new(kind: ConstraintKind, y: Event, z: Option<Event>, epsilon: f64) -> Result<Self> {
        if !epsilon.is_finite() {
            return Err(Error::InvalidConstraint(format!(
                "threshold {epsilon} is not finite"
            )));
        }
        let binary = matches!(kind, ConstraintKind::Difference | ConstraintKind::Ratio);
        if binary != z.is_some() {
            return Err(Error::InvalidConstraint(format!(
                "{kind:?} constraints take {} events",
                if binary { "two" } else { "one" }
            )));
        }
        if kind == ConstraintKind::Ratio && epsilon <= 0.0 {
            return Err(Error::InvalidConstraint(
                "ratio threshold must be positive".into(),
            ));
        }
        Ok(Self {
            kind,
            y,
            z,
            epsilon,
        })
    }

    pub fn difference(y: Event, z: Event, epsilon: f64) -> Result<Self> {
        Self::new(ConstraintKind::Difference, y, Some(z), epsilon)
    }

    pub fn ratio(y: Event, z: Event, epsilon: f64) -> Result<Self> {
        Self::new(ConstraintKind::Ratio, y, Some(z), epsilon)
    }

    pub fn at_least(y: Event, epsilon: f64) -> Result<Self> {
        Self::new(ConstraintKind::AtLeast, y, None, epsilon)
    }

    pub fn at_most(y: Event, epsilon: f64) -> Result<Self> {
        Self::new(ConstraintKind::AtMost, y, None, epsilon)
    }

    pub fn kind(&self) -> ConstraintKind {
        self.kind
    }

    pub fn y(&self) -> &Event {
        &self.y
    }

    pub fn z(&self) -> Option<&Event> {
        self.z.as_ref()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn check(&self, network: &Network, evidence: &Evidence) -> Result<()> {
        for event in std::iter::once(&self.y).chain(self.z.as_ref()) {
            event.resolve(network)?;
            if evidence.contains(&event.variable) {
                return Err(Error::QueryInEvidence(event.variable.clone()));
            }
        }
        Ok(())
    }

    /// `C`: the constraint margin in joint space. Non-negative iff the
    /// constraint holds.
    pub fn margin(&self, pe: f64, pye: f64, pze: f64) -> f64 {
        let eps = self.epsilon;
        match self.kind {
            ConstraintKind::Difference => pye - pze - eps * pe,
            ConstraintKind::Ratio => pye - eps * pze,
            ConstraintKind::AtLeast => pye - eps * pe,
            ConstraintKind::AtMost => eps * pe - pye,
        }
    }

    /// `k`: the constraint holds after a change `δ` iff `C ≥ δ·k`.
    pub fn rate(&self, c: &Coefficients) -> f64 {
        let eps = self.epsilon;
        match self.kind {
            ConstraintKind::Difference => -c.alpha_ye + c.alpha_ze + eps * c.alpha_e,
            ConstraintKind::Ratio => -c.alpha_ye + eps * c.alpha_ze,
            ConstraintKind::AtLeast => -c.alpha_ye + eps * c.alpha_e,
            ConstraintKind::AtMost => c.alpha_ye - eps * c.alpha_e,
        }
    }

    /// Constraint expression on posteriors; non-negative iff satisfied. The
    /// ratio form is multiplied out so a zero denominator stays finite.
    pub fn slack(&self, py: f64, pz: f64) -> f64 {
        let eps = self.epsilon;
        match self.kind {
            ConstraintKind::Difference => py - pz - eps,
            ConstraintKind::Ratio => py - eps * pz,
            ConstraintKind::AtLeast => py - eps,
            ConstraintKind::AtMost => eps - py,
        }
    }

    fn scale(&self, c: &Coefficients) -> f64 {
        c.alpha_ye.abs() + c.alpha_ze.abs() + (self.epsilon * c.alpha_e).abs()
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let y = &self.y;
        match (&self.kind, &self.z) {
            (ConstraintKind::Difference, Some(z)) => {
                write!(f, "P({y}) - P({z}) >= {}", self.epsilon)
            }
            (ConstraintKind::Ratio, Some(z)) => write!(f, "P({y}) / P({z}) >= {}", self.epsilon),
            (ConstraintKind::AtMost, _) => write!(f, "P({y}) <= {}", self.epsilon),
            _ => write!(f, "P({y}) >= {}", self.epsilon),
        }
    }
}

/// Slopes of `Pr(e)`, `Pr(y, e)` and `Pr(z, e)` in one meta parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coefficients {
    pub alpha_e: f64,
    pub alpha_ye: f64,
    pub alpha_ze: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }
}

/// A single parameter change that enforces the constraint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recommendation {
    pub param: MetaParameterRef,
    #[serde(skip)]
    pub location: ParamLocation,
    /// `var=state | parent=state,...`
    pub label: String,
    pub current_tau: f64,
    pub minimal_delta: f64,
    pub new_tau: f64,
    /// `None` when `new_tau` is 0 or 1.
    pub log_odds_distance: Option<f64>,
    /// Every parameter value that enforces the constraint.
    pub feasible_interval: Interval,
    /// `new_tau` lies on 0 or 1; the parameter stops being tunable once applied.
    pub reaches_boundary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Enforces,
    /// `k = 0`: no change to this parameter moves the margin.
    Irrelevant,
    /// The required change would leave `[0, 1]`.
    Infeasible,
    /// The parameter is 0 or 1.
    NonTunable,
    /// The only enforcing change makes the evidence impossible.
    UndefinedPosterior,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assessment {
    pub label: String,
    #[serde(skip)]
    pub location: ParamLocation,
    pub tau: f64,
    pub coefficients: Option<Coefficients>,
    pub rate: Option<f64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuningReport {
    pub probability_of_evidence: f64,
    pub margin: f64,
    pub already_satisfied: bool,
    /// One per meta parameter; empty when the constraint already holds.
    pub assessments: Vec<Assessment>,
    /// Sorted by log-odds distance, then variable order, then row.
    pub recommendations: Vec<Recommendation>,
}

impl TuningReport {
    pub fn verdict_of(&self, variable: usize) -> impl Iterator<Item = Verdict> + '_ {
        self.assessments
            .iter()
            .filter(move |a| a.location.variable == variable)
            .map(|a| a.verdict)
    }
}

/// Slope of `Pr(i)` in the meta parameter `p`.
pub fn alpha(network: &Network, inst: &Instantiation, param: &MetaParameterRef) -> Result<f64> {
    let loc = network.locate(param)?;
    if !is_tunable(network.tau(loc)) {
        return Err(Error::NonTunable(network.label(loc)));
    }
    let fm = engine::family_marginals(network, inst)?;
    Ok(alpha_from_marginals(network, &fm, loc))
}

pub(crate) fn alpha_from_marginals(
    network: &Network,
    fm: &FamilyMarginals,
    loc: ParamLocation,
) -> f64 {
    let row = network.cpt(loc.variable).row(loc.row);
    let other = 1 - loc.state;
    let joint = fm.table(loc.variable);
    joint[loc.row][loc.state] / row[loc.state] - joint[loc.row][other] / row[other]
}

/// `∂Pr(y|e)/∂τ` by the quotient rule on the affine joints.
pub fn posterior_slope(
    network: &Network,
    y: &Event,
    evidence: &Evidence,
    param: &MetaParameterRef,
) -> Result<f64> {
    if evidence.contains(&y.variable) {
        return Err(Error::QueryInEvidence(y.variable.clone()));
    }
    let ye = evidence.with(y)?;
    let pe = engine::joint_prob(network, evidence)?;
    if pe <= 0.0 {
        return Err(Error::ZeroEvidence);
    }
    let pye = engine::joint_prob(network, &ye)?;
    let a_e = alpha(network, evidence, param)?;
    let a_ye = alpha(network, &ye, param)?;
    Ok((a_ye * pe - pye * a_e) / (pe * pe))
}

/// All single-parameter changes enforcing `constraint`, minimal in `|δ|`,
/// ranked by log-odds distance. Empty when the constraint already holds.
pub fn solve(
    network: &Network,
    evidence: &Evidence,
    constraint: &Constraint,
) -> Result<Vec<Recommendation>> {
    Ok(analyze(network, evidence, constraint)?.recommendations)
}

/// [`solve`] with a per-parameter account of why each did or did not
/// produce a recommendation.
pub fn analyze(
    network: &Network,
    evidence: &Evidence,
    constraint: &Constraint,
) -> Result<TuningReport> {
    constraint.check(network, evidence)?;
    let ye = evidence.with(constraint.y())?;
    let fm_e = engine::family_marginals(network, evidence)?;
    let pe = fm_e.probability();
    if pe <= 0.0 {
        return Err(Error::ZeroEvidence);
    }
    let fm_ye = engine::family_marginals(network, &ye)?;
    let fm_ze = constraint
        .z()
        .map(|z| engine::family_marginals(network, &evidence.with(z)?))
        .transpose()?;

    let pye = fm_ye.probability();
    let pze = fm_ze.as_ref().map_or(0.0, FamilyMarginals::probability);
    let margin = constraint.margin(pe, pye, pze);
    if margin >= 0.0 {
        return Ok(TuningReport {
            probability_of_evidence: pe,
            margin,
            already_satisfied: true,
            assessments: Vec::new(),
            recommendations: Vec::new(),
        });
    }

    let mut assessments = Vec::new();
    let mut recommendations = Vec::new();
    for mp in network.list_meta_parameters() {
        let loc = mp.location;
        let label = network.label(loc);
        let mut assessment = Assessment {
            label: label.clone(),
            location: loc,
            tau: mp.tau,
            coefficients: None,
            rate: None,
            verdict: Verdict::NonTunable,
        };
        if !mp.tunable {
            assessments.push(assessment);
            continue;
        }
        let coefficients = Coefficients {
            alpha_e: alpha_from_marginals(network, &fm_e, loc),
            alpha_ye: alpha_from_marginals(network, &fm_ye, loc),
            alpha_ze: fm_ze
                .as_ref()
                .map_or(0.0, |fm| alpha_from_marginals(network, fm, loc)),
        };
        let k = constraint.rate(&coefficients);
        assessment.coefficients = Some(coefficients);
        assessment.rate = Some(k);

        let outcome = solve_one(mp.tau, margin, k, constraint.scale(&coefficients));
        assessment.verdict = match outcome {
            Err(verdict) => verdict,
            Ok((delta, feasible_interval)) => {
                if pe + coefficients.alpha_e * delta <= pe * 1e-12 {
                    Verdict::UndefinedPosterior
                } else {
                    let new_tau = (mp.tau + delta).clamp(0.0, 1.0);
                    recommendations.push(Recommendation {
                        param: mp.reference.clone(),
                        location: loc,
                        label,
                        current_tau: mp.tau,
                        minimal_delta: new_tau - mp.tau,
                        new_tau,
                        log_odds_distance: bounds::log_odds_distance(mp.tau, new_tau)
                            .ok()
                            .map(|b| b.value()),
                        feasible_interval,
                        reaches_boundary: !is_tunable(new_tau),
                    });
                    Verdict::Enforces
                }
            }
        };
        assessments.push(assessment);
    }

    recommendations.sort_by(ranking);
    Ok(TuningReport {
        probability_of_evidence: pe,
        margin,
        already_satisfied: false,
        assessments,
        recommendations,
    })
}

/// Solves `margin ≥ δ·k` over `δ ∈ [−τ, 1−τ]` for the δ of least magnitude,
/// given `margin < 0`. Returns that δ and the interval of enforcing `τ′`.
fn solve_one(
    tau: f64,
    margin: f64,
    k: f64,
    scale: f64,
) -> std::result::Result<(f64, Interval), Verdict> {
    const EDGE: f64 = 1e-12;
    if k.abs() <= IRRELEVANCE_TOLERANCE * scale.min(1.0) {
        return Err(Verdict::Irrelevant);
    }
    let delta = margin / k;
    if k > 0.0 {
        // δ ≤ margin/k < 0
        if delta < -tau - EDGE {
            return Err(Verdict::Infeasible);
        }
        let delta = delta.max(-tau);
        Ok((
            delta,
            Interval {
                low: 0.0,
                high: tau + delta,
            },
        ))
    } else {
        // δ ≥ margin/k > 0
        if delta > 1.0 - tau + EDGE {
            return Err(Verdict::Infeasible);
        }
        let delta = delta.min(1.0 - tau);
        Ok((
            delta,
            Interval {
                low: tau + delta,
                high: 1.0,
            },
        ))
    }
}

fn ranking(a: &Recommendation, b: &Recommendation) -> Ordering {
    let by_distance = match (a.log_odds_distance, b.log_odds_distance) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    };
    by_distance
        .then(a.location.variable.cmp(&b.location.variable))
        .then(a.location.row.cmp(&b.location.row))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verification {
    pub satisfied: bool,
    pub slack: f64,
    pub posterior_y: f64,
    pub posterior_z: Option<f64>,
}

/// Applies `rec` and re-evaluates the constraint by exact inference.
pub fn verify(
    network: &Network,
    evidence: &Evidence,
    constraint: &Constraint,
    rec: &Recommendation,
) -> Result<Verification> {
    let changed = network.apply_change(&rec.param, rec.new_tau)?;
    evaluate(&changed, evidence, constraint)
}

/// Evaluates the constraint on `network` as it stands.
pub fn evaluate(
    network: &Network,
    evidence: &Evidence,
    constraint: &Constraint,
) -> Result<Verification> {
    let py = engine::posterior(network, constraint.y(), evidence)?;
    let pz = constraint
        .z()
        .map(|z| engine::posterior(network, z, evidence))
        .transpose()?;
    let slack = constraint.slack(py, pz.unwrap_or(0.0));
    Ok(Verification {
        satisfied: slack >= -VERIFY_TOLERANCE,
        slack,
        posterior_y: py,
        posterior_z: pz,
    })
}
