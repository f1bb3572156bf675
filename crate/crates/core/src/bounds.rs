//! Analytic sensitivity bounds.
//!
//! For a binary variable `X` with meta parameter `τ = θ(x|u)`:
//!
//! * `|∂Pr(y|e)/∂τ| ≤ Pr(y|e)(1 − Pr(y|e)) / (τ(1 − τ))`, and the bound is
//!   attained by some networks;
//! * for an arbitrary change `τ → τ′`, the log-odds of any query moves by at
//!   most the log-odds distance between `τ` and `τ′`.
//!
//! The second result turns into closed-form query intervals, lower bounds on
//! the parameter change needed for a target query value, and permissible
//! change envelopes. Probabilities of exactly 0 or 1 have no log-odds; every
//! function here reports them as errors or flags rather than infinities.

use serde::Serialize;

use crate::engine;
use crate::error::{Error, Result};
use crate::instantiation::{Event, Evidence};
use crate::network::{is_tunable, MetaParameterRef, Network};

/// Header row of the envelope CSV.
pub const ENVELOPE_CSV_HEADER: &str =
    "p,delta_plus_outer,delta_plus_inner,delta_minus_outer,delta_minus_inner";

/// An absolute log-odds change `|ln O′ − ln O|`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct OddsRatioBudget(f64);

impl OddsRatioBudget {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value >= 0.0 {
            Ok(Self(value))
        } else {
            Err(Error::OutOfRange {
                value,
                expected: "[0, inf)",
            })
        }
    }

    pub fn zero() -> Self {
        Self(0.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QueryInterval {
    pub low: f64,
    pub high: f64,
    /// The query was 0 or 1, where no change to a single parameter can move
    /// it; the interval is the single point.
    pub degenerate: bool,
}

impl QueryInterval {
    pub fn contains(&self, q: f64) -> bool {
        self.low <= q && q <= self.high
    }
}

/// Permissible parameter changes at one parameter value `p`.
///
/// The outer budget keeps the query at or below the band's upper edge, the
/// inner one at or above its lower edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopePoint {
    pub p: f64,
    pub delta_plus_outer: f64,
    pub delta_plus_inner: f64,
    pub delta_minus_outer: f64,
    pub delta_minus_inner: f64,
}

impl EnvelopePoint {
    /// Largest increase that keeps the query inside the whole band.
    pub fn safe_increase(&self) -> f64 {
        self.delta_plus_outer.min(self.delta_plus_inner)
    }

    /// Largest decrease that keeps the query inside the whole band.
    pub fn safe_decrease(&self) -> f64 {
        self.delta_minus_outer.min(self.delta_minus_inner)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChangeLowerBound {
    pub budget: OddsRatioBudget,
    /// Closest parameter value at that log-odds distance, on the side of the
    /// target.
    pub nearest_tau: f64,
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn interior(p: f64) -> Result<f64> {
    if p > 0.0 && p < 1.0 {
        Ok(p)
    } else {
        Err(Error::OutOfRange {
            value: p,
            expected: "(0, 1)",
        })
    }
}

fn probability(p: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(Error::OutOfRange {
            value: p,
            expected: "[0, 1]",
        })
    }
}

/// Bound on `|∂Pr(y|e)/∂τ|` given the query value `q` and parameter `p`.
pub fn derivative_bound(q: f64, p: f64) -> Result<f64> {
    let q = probability(q)?;
    let p = interior(p)?;
    Ok(q * (1.0 - q) / (p * (1.0 - p)))
}

/// Exact `∂Pr(y|e)/∂τ` from conditional family marginals:
///
/// ```text
/// [Pr(y,x,u|e) − Pr(y|e)Pr(x,u|e) − θ(Pr(y,u|e) − Pr(y|e)Pr(u|e))] / (θ(1 − θ))
/// ```
pub fn analytic_query_derivative(
    network: &Network,
    y: &Event,
    evidence: &Evidence,
    param: &MetaParameterRef,
) -> Result<f64> {
    if evidence.contains(&y.variable) {
        return Err(Error::QueryInEvidence(y.variable.clone()));
    }
    let loc = network.locate(param)?;
    let theta = network.tau(loc);
    if !is_tunable(theta) {
        return Err(Error::NonTunable(network.label(loc)));
    }
    let fm_e = engine::family_marginals(network, evidence)?;
    let pe = fm_e.probability();
    if pe <= 0.0 {
        return Err(Error::ZeroEvidence);
    }
    let fm_ye = engine::family_marginals(network, &evidence.with(y)?)?;
    let q = fm_ye.probability() / pe;

    let p_yxu = fm_ye.get(loc) / pe;
    let p_xu = fm_e.get(loc) / pe;
    let p_yu = fm_ye.row_total(loc.variable, loc.row) / pe;
    let p_u = fm_e.row_total(loc.variable, loc.row) / pe;
    Ok((p_yxu - q * p_xu - theta * (p_yu - q * p_u)) / (theta * (1.0 - theta)))
}

/// Tight factor `(1 − q)/(1 − p)` bounding the relative query change by the
/// relative parameter change, for infinitesimal changes. `p` must be at most
/// one half (use the complementary parameter otherwise), so the factor never
/// exceeds 2.
pub fn sensitivity_factor(q: f64, p: f64) -> Result<f64> {
    let q = probability(q)?;
    if !(p > 0.0 && p <= 0.5) {
        return Err(Error::OutOfRange {
            value: p,
            expected: "(0, 0.5]",
        });
    }
    Ok((1.0 - q) / (1.0 - p))
}

/// Range a query at `q` can reach when some parameter moves by `budget` in
/// log-odds.
pub fn query_interval(q: f64, budget: OddsRatioBudget) -> Result<QueryInterval> {
    let q = probability(q)?;
    if q == 0.0 || q == 1.0 {
        return Ok(QueryInterval {
            low: q,
            high: q,
            degenerate: true,
        });
    }
    let centre = logit(q);
    Ok(QueryInterval {
        low: logistic(centre - budget.value()),
        high: logistic(centre + budget.value()),
        degenerate: false,
    })
}

/// `|ln O(p_new) − ln O(p)|`.
pub fn log_odds_distance(p: f64, p_new: f64) -> Result<OddsRatioBudget> {
    let p = interior(p)?;
    let p_new = interior(p_new)?;
    OddsRatioBudget::new((logit(p_new) - logit(p)).abs())
}

/// Constant-time lower bound on the change to a parameter at `p` needed to
/// move a query from `q` to `q_target`.
pub fn param_change_lower_bound(q: f64, q_target: f64, p: f64) -> Result<ChangeLowerBound> {
    let budget = log_odds_distance(q, q_target)?;
    let p = interior(p)?;
    let shift = if q_target >= q {
        budget.value()
    } else {
        -budget.value()
    };
    Ok(ChangeLowerBound {
        budget,
        nearest_tau: logistic(logit(p) + shift),
    })
}

/// New prior of a root `X` that moves `Pr(x|e)` from `posterior` to
/// `target_posterior`. The posterior odds over the prior odds do not depend
/// on the prior, so the answer is exact.
pub fn exact_root_change(prior: f64, posterior: f64, target_posterior: f64) -> Result<f64> {
    let prior = interior(prior)?;
    let posterior = interior(posterior)?;
    let target = interior(target_posterior)?;
    Ok(logistic(logit(prior) + logit(target) - logit(posterior)))
}

fn move_by(p: f64, budget: OddsRatioBudget) -> (f64, f64) {
    let centre = logit(p);
    let up = logistic(centre + budget.value()) - p;
    let down = p - logistic(centre - budget.value());
    (up.max(0.0), down.max(0.0))
}

/// Permissible change envelopes for a query at `q0` that must stay inside
/// `[band_low, band_high]`, evaluated at each parameter value in `grid`.
pub fn envelope(
    q0: f64,
    band_low: f64,
    band_high: f64,
    grid: &[f64],
) -> Result<Vec<EnvelopePoint>> {
    for x in [q0, band_low, band_high] {
        interior(x)?;
    }
    if !(band_low <= q0 && q0 <= band_high) {
        return Err(Error::InvalidArgument(format!(
            "query {q0} lies outside the band [{band_low}, {band_high}]"
        )));
    }
    let outer = log_odds_distance(q0, band_high)?;
    let inner = log_odds_distance(q0, band_low)?;
    grid.iter()
        .map(|&p| {
            let p = interior(p)?;
            let (plus_outer, minus_outer) = move_by(p, outer);
            let (plus_inner, minus_inner) = move_by(p, inner);
            Ok(EnvelopePoint {
                p,
                delta_plus_outer: plus_outer,
                delta_plus_inner: plus_inner,
                delta_minus_outer: minus_outer,
                delta_minus_inner: minus_inner,
            })
        })
        .collect()
}

/// Interior grid `step, 2·step, …` below 1. Values are rounded to ten
/// decimals so that e.g. a step of `0.01` yields `0.07` rather than
/// `0.07000000000000001`.
pub fn probability_grid(step: f64) -> Result<Vec<f64>> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "grid step {step} must be positive"
        )));
    }
    let mut grid = Vec::new();
    for k in 1.. {
        let p = ((k as f64 * step) * 1e10).round() / 1e10;
        if p >= 1.0 {
            break;
        }
        grid.push(p);
    }
    if grid.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "grid step {step} leaves no point inside (0, 1)"
        )));
    }
    Ok(grid)
}

pub fn envelope_csv(points: &[EnvelopePoint]) -> String {
    let mut out = String::with_capacity(64 * (points.len() + 1));
    out.push_str(ENVELOPE_CSV_HEADER);
    out.push('\n');
    for pt in points {
        out.push_str(&format!(
            "{},{:.12},{:.12},{:.12},{:.12}\n",
            pt.p,
            pt.delta_plus_outer,
            pt.delta_plus_inner,
            pt.delta_minus_outer,
            pt.delta_minus_inner
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::instantiation::Instantiation;

    fn root(name: &str) -> MetaParameterRef {
        MetaParameterRef {
            variable: name.into(),
            state: "true".into(),
            parent_instantiation: Default::default(),
        }
    }

    #[test]
    fn derivative_bound_values() {
        assert!((derivative_bound(0.5, 0.02).unwrap() - 0.25 / 0.0196).abs() < 1e-12);
        assert!((derivative_bound(0.5, 0.02).unwrap() - 12.755_102).abs() < 1e-6);
        assert_eq!(derivative_bound(0.0, 0.3).unwrap(), 0.0);
        assert_eq!(derivative_bound(1.0, 0.3).unwrap(), 0.0);
        assert!(derivative_bound(0.5, 0.0).is_err());
        assert!(derivative_bound(0.5, 1.0).is_err());
    }

    #[test]
    fn agreement_network_derivative_attains_bound() {
        let (tx, ty) = (0.3, 0.7);
        let n = fixtures::agreement_network(tx, ty);
        let e = Instantiation::from_pairs([("e", "true")]).unwrap();
        let d = analytic_query_derivative(&n, &Event::new("y", "true"), &e, &root("x")).unwrap();
        let by_hand = ty * (1.0 - ty) / (tx * ty + (1.0 - tx) * (1.0 - ty)).powi(2);
        assert!((d - by_hand).abs() < 1e-12);
        assert!((d - 1.190_48).abs() < 1e-5);
        let q = engine::posterior(&n, &Event::new("y", "true"), &e).unwrap();
        assert!((derivative_bound(q, tx).unwrap() - d).abs() < 1e-12);
    }

    #[test]
    fn agreement_network_symmetric_case() {
        let n = fixtures::agreement_network(0.25, 0.75);
        let e = Instantiation::from_pairs([("e", "true")]).unwrap();
        let d = analytic_query_derivative(&n, &Event::new("y", "true"), &e, &root("x")).unwrap();
        assert!((d - 1.0 / (4.0 * 0.25 * 0.75)).abs() < 1e-12);
    }

    #[test]
    fn analytic_derivative_matches_quotient_rule_on_fixture() {
        let n = fixtures::fire_alarm();
        let e = Instantiation::from_pairs([("report", "true"), ("smoke", "false")]).unwrap();
        let y = Event::new("fire", "true");
        for p in n.list_meta_parameters() {
            let a = analytic_query_derivative(&n, &y, &e, &p.reference).unwrap();
            let b = crate::tuner::posterior_slope(&n, &y, &e, &p.reference).unwrap();
            assert!((a - b).abs() < 1e-10, "{}: {a} vs {b}", p.reference);
        }
    }

    #[test]
    fn sensitivity_factor_range() {
        assert!((sensitivity_factor(0.0, 0.5).unwrap() - 2.0).abs() < 1e-15);
        assert!(sensitivity_factor(0.1, 0.5).unwrap() < 2.0);
        assert_eq!(sensitivity_factor(1.0, 0.3).unwrap(), 0.0);
        assert!(sensitivity_factor(0.3, 0.6).is_err());
        assert!(sensitivity_factor(0.3, 0.0).is_err());
    }

    #[test]
    fn query_interval_values() {
        let iv = query_interval(0.029, OddsRatioBudget::new(0.616).unwrap()).unwrap();
        assert!((iv.low - 0.016).abs() < 0.001, "{iv:?}");
        assert!((iv.high - 0.053).abs() < 0.001, "{iv:?}");
        assert!(iv.contains(0.021));
        let iv = query_interval(0.4, OddsRatioBudget::zero()).unwrap();
        assert!((iv.low - 0.4).abs() < 1e-15 && (iv.high - 0.4).abs() < 1e-15);
        let iv = query_interval(1.0, OddsRatioBudget::new(3.0).unwrap()).unwrap();
        assert!(iv.degenerate);
        assert_eq!((iv.low, iv.high), (1.0, 1.0));
    }

    #[test]
    fn budget_rejects_negative_and_infinite() {
        assert!(OddsRatioBudget::new(-0.1).is_err());
        assert!(OddsRatioBudget::new(f64::INFINITY).is_err());
        assert!(OddsRatioBudget::new(f64::NAN).is_err());
    }

    #[test]
    fn log_odds_distance_values() {
        assert!((log_odds_distance(0.90, 0.95).unwrap().value() - 0.7472).abs() < 5e-4);
        assert!((log_odds_distance(0.90, 0.85).unwrap().value() - 0.4626).abs() < 5e-4);
        assert_eq!(log_odds_distance(0.3, 0.3).unwrap().value(), 0.0);
        assert!(log_odds_distance(0.0, 0.3).is_err());
        assert!(log_odds_distance(0.3, 1.0).is_err());
    }

    #[test]
    fn lower_bound_values() {
        let lb = param_change_lower_bound(0.25, 0.50, 0.01).unwrap();
        assert!((lb.budget.value() - 3f64.ln()).abs() < 1e-12);
        assert!((lb.nearest_tau - 0.0294).abs() < 1e-4, "{lb:?}");
        assert!(lb.nearest_tau <= 0.03);
        let lb = param_change_lower_bound(0.4, 0.4, 0.2).unwrap();
        assert_eq!(lb.budget.value(), 0.0);
        assert!((lb.nearest_tau - 0.2).abs() < 1e-15);
        let lb = param_change_lower_bound(0.50, 0.65, 0.02).unwrap();
        assert!((lb.nearest_tau - 0.0365).abs() < 1e-4);
        let down = param_change_lower_bound(0.6, 0.4, 0.5).unwrap();
        assert!(down.nearest_tau < 0.5);
    }

    #[test]
    fn root_change_values() {
        let p = exact_root_change(0.02, 0.50, 0.65).unwrap();
        assert!((p - 0.036).abs() < 0.001, "{p}");
        assert!((exact_root_change(0.3, 0.6, 0.6).unwrap() - 0.3).abs() < 1e-15);
        assert!(exact_root_change(0.0, 0.5, 0.6).is_err());
    }

    #[test]
    fn root_change_reproduces_target_by_inference() {
        let n = fixtures::fire_alarm();
        let e = Instantiation::from_pairs([("report", "true"), ("smoke", "false")]).unwrap();
        let y = Event::new("tampering", "true");
        let q = engine::posterior(&n, &y, &e).unwrap();
        let p = exact_root_change(0.02, q, 0.65).unwrap();
        let m = n.apply_change(&root("tampering"), p).unwrap();
        let q2 = engine::posterior(&m, &y, &e).unwrap();
        assert!((q2 - 0.65).abs() < 1e-9, "{q2}");
    }

    #[test]
    fn envelope_at_one_half() {
        let pts = envelope(0.90, 0.85, 0.95, &[0.5]).unwrap();
        assert!((pts[0].delta_plus_outer - 0.1786).abs() < 5e-4);
        assert!((pts[0].delta_plus_inner - 0.1136).abs() < 5e-4);
        assert_eq!(pts[0].safe_increase(), pts[0].delta_plus_inner);
        // Symmetric about one half.
        assert!((pts[0].delta_plus_outer - pts[0].delta_minus_outer).abs() < 1e-12);
    }

    #[test]
    fn envelope_vanishes_at_extremes() {
        let pts = envelope(0.90, 0.85, 0.95, &[1e-9, 1.0 - 1e-9]).unwrap();
        for pt in pts {
            for d in [
                pt.delta_plus_outer,
                pt.delta_plus_inner,
                pt.delta_minus_outer,
                pt.delta_minus_inner,
            ] {
                assert!(d < 1e-8);
            }
        }
    }

    #[test]
    fn less_extreme_query_is_less_robust() {
        let grid = probability_grid(0.01).unwrap();
        let a = envelope(0.90, 0.85, 0.95, &grid).unwrap();
        let b = envelope(0.60, 0.55, 0.65, &grid).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!(y.delta_plus_outer < x.delta_plus_outer);
            assert!(y.delta_plus_inner < x.delta_plus_inner);
            assert!(y.delta_minus_outer < x.delta_minus_outer);
            assert!(y.delta_minus_inner < x.delta_minus_inner);
        }
    }

    #[test]
    fn envelope_rejects_bad_band() {
        assert!(envelope(0.9, 0.95, 0.99, &[0.5]).is_err());
        assert!(envelope(0.9, 0.0, 0.95, &[0.5]).is_err());
        assert!(envelope(0.9, 0.85, 0.95, &[1.0]).is_err());
    }

    #[test]
    fn grid_shape() {
        let g = probability_grid(0.01).unwrap();
        assert_eq!(g.len(), 99);
        assert_eq!(g[6], 0.07);
        assert_eq!(g[98], 0.99);
        assert!(probability_grid(1.5).is_err());
        assert!(probability_grid(0.0).is_err());
        assert!(probability_grid(-0.1).is_err());
    }

    #[test]
    fn csv_layout() {
        let csv = envelope_csv(&envelope(0.9, 0.85, 0.95, &[0.5]).unwrap());
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(ENVELOPE_CSV_HEADER));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 5);
        assert_eq!(row[0], "0.5");
    }
}
