//! Randomized end-to-end checks against independent references.
//!
//! Each suite draws its own random networks and reports every case that
//! misses its tolerance. The CLI `selftest` command and the acceptance suite
//! both run these.

use std::fmt;

use rand::Rng;

use crate::bounds::{analytic_query_derivative, log_odds_distance};
use crate::engine;
use crate::network::{MetaParameter, Network};
use crate::oracle::enumerate_joint_oracle;
use crate::testgen::{random_event, random_evidence, random_network, RandomNetworkConfig};
use crate::tuner::{self, Constraint, Verdict};
use crate::{Event, Evidence};

pub const ORACLE_TOLERANCE: f64 = 1e-10;
pub const DERIVATIVE_RELATIVE_TOLERANCE: f64 = 1e-5;
pub const LOG_ODDS_TOLERANCE: f64 = 1e-9;
pub const GRID_STEP: f64 = 0.001;
const FD_STEP: f64 = 1e-6;
/// Relative errors are taken against at least this magnitude.
const DERIVATIVE_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: usize,
    /// Largest observed error, in the suite's own units.
    pub worst: f64,
    pub failures: Vec<String>,
}

impl SuiteReport {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            cases: 0,
            worst: 0.0,
            failures: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn record(&mut self, error: f64, ok: bool, detail: impl FnOnce() -> String) {
        self.worst = self.worst.max(error);
        if !ok {
            self.failures.push(detail());
        }
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} cases, {} failures, worst {:.3e}",
            self.name,
            self.cases,
            self.failures.len(),
            self.worst
        )
    }
}

fn with_params<R: Rng + ?Sized>(
    rng: &mut R,
    config: &RandomNetworkConfig,
) -> (Network, Vec<MetaParameter>) {
    loop {
        let n = random_network(rng, config);
        let params = n.list_meta_parameters();
        if !params.is_empty() {
            return (n, params);
        }
    }
}

fn random_query<R: Rng + ?Sized>(rng: &mut R, n: &Network) -> (Event, Evidence) {
    let qv = rng.random_range(0..n.len());
    let e = random_evidence(rng, n, 3, &[qv]);
    (random_event(rng, n, qv), e)
}

/// Variable elimination against brute-force enumeration of `Pr(i)`.
pub fn oracle_equivalence<R: Rng + ?Sized>(rng: &mut R, cases: usize) -> SuiteReport {
    let mut report = SuiteReport::new("oracle equivalence");
    let config = RandomNetworkConfig::default();
    for case in 0..cases {
        let n = random_network(rng, &config);
        let i = random_evidence(rng, &n, 4, &[]);
        report.cases += 1;
        match (engine::joint_prob(&n, &i), enumerate_joint_oracle(&n, &i)) {
            (Ok(ve), Ok(oracle)) => {
                let err = (ve - oracle).abs();
                report.record(err, err <= ORACLE_TOLERANCE, || {
                    format!("case {case}: elimination {ve} vs enumeration {oracle} for {i}")
                });
            }
            (a, b) => report.failures.push(format!("case {case}: {a:?} / {b:?}")),
        }
    }
    report
}

/// Closed-form query derivative against central finite differences.
pub fn derivative_agreement<R: Rng + ?Sized>(rng: &mut R, cases: usize) -> SuiteReport {
    let mut report = SuiteReport::new("derivative vs finite differences");
    let config = RandomNetworkConfig {
        max_nodes: 8,
        ..Default::default()
    };
    while report.cases < cases {
        let (n, params) = with_params(rng, &config);
        let (y, e) = random_query(rng, &n);
        let p = &params[rng.random_range(0..params.len())];
        let analytic = match analytic_query_derivative(&n, &y, &e, &p.reference) {
            Ok(d) => d,
            // Impossible evidence has no posterior to differentiate.
            Err(crate::Error::ZeroEvidence) => continue,
            Err(err) => {
                report.cases += 1;
                report.failures.push(format!("{}: {err}", p.reference));
                continue;
            }
        };
        report.cases += 1;
        let post = |t: f64| {
            n.apply_change_at(p.location, t)
                .and_then(|m| engine::posterior(&m, &y, &e))
        };
        // Stay inside (0, 1) for parameters near the edge.
        let h = FD_STEP.min(p.tau / 2.0).min((1.0 - p.tau) / 2.0);
        let fd = match (post(p.tau + h), post(p.tau - h)) {
            (Ok(a), Ok(b)) => (a - b) / (2.0 * h),
            (a, b) => {
                report
                    .failures
                    .push(format!("{}: {a:?} / {b:?}", p.reference));
                continue;
            }
        };
        let rel = (analytic - fd).abs() / analytic.abs().max(DERIVATIVE_FLOOR);
        report.record(rel, rel <= DERIVATIVE_RELATIVE_TOLERANCE, || {
            format!(
                "Pr({y}|{e}) in {}: analytic {analytic} vs finite difference {fd}",
                p.reference
            )
        });
    }
    report
}

/// The log-odds change of a query never exceeds that of the parameter.
pub fn log_odds_containment<R: Rng + ?Sized>(rng: &mut R, cases: usize) -> SuiteReport {
    let mut report = SuiteReport::new("log-odds change bound");
    let config = RandomNetworkConfig::default();
    while report.cases < cases {
        let (n, params) = with_params(rng, &config);
        let (y, e) = random_query(rng, &n);
        let p = &params[rng.random_range(0..params.len())];
        let new_tau = rng.random_range(0.001..0.999);
        let Ok(before) = engine::posterior(&n, &y, &e) else {
            continue;
        };
        let Ok(after) = n
            .apply_change_at(p.location, new_tau)
            .and_then(|m| engine::posterior(&m, &y, &e))
        else {
            continue;
        };
        // A query pinned at 0 or 1 does not move at all.
        if before <= 0.0 || before >= 1.0 {
            report.cases += 1;
            report.record(0.0, before == after, || {
                format!("Pr({y}|{e}) moved off {before}")
            });
            continue;
        }
        report.cases += 1;
        let query = log_odds_distance(before, after)
            .map(|b| b.value())
            .unwrap_or(f64::INFINITY);
        let param = log_odds_distance(p.tau, new_tau)
            .map(|b| b.value())
            .unwrap_or(f64::INFINITY);
        let excess = (query - param).max(0.0);
        report.record(excess, query <= param + LOG_ODDS_TOLERANCE, || {
            format!(
                "Pr({y}|{e}): query moved {query}, {} moved {param}",
                p.reference
            )
        });
    }
    report
}

/// A random violated constraint on a random network of at most `max_nodes`.
pub fn violated_instance<R: Rng + ?Sized>(
    rng: &mut R,
    max_nodes: usize,
) -> Option<(Network, Evidence, Constraint)> {
    let config = RandomNetworkConfig {
        max_nodes,
        ..Default::default()
    };
    let network = random_network(rng, &config);
    if network.len() < 2 {
        return None;
    }
    let yv = rng.random_range(0..network.len());
    let mut zv = rng.random_range(0..network.len());
    if zv == yv {
        zv = (yv + 1) % network.len();
    }
    let evidence = random_evidence(rng, &network, 2, &[yv, zv]);
    let y = random_event(rng, &network, yv);
    let z = random_event(rng, &network, zv);
    let qy = engine::posterior(&network, &y, &evidence).ok()?;
    let qz = engine::posterior(&network, &z, &evidence).ok()?;
    let constraint = match rng.random_range(0..4) {
        0 => Constraint::at_least(y, (qy + rng.random_range(0.02..0.4)).min(0.995)),
        1 => Constraint::at_most(y, (qy - rng.random_range(0.02..0.4)).max(0.005)),
        2 => Constraint::difference(y, z, qy - qz + rng.random_range(0.02..0.5)),
        _ => Constraint::ratio(y, z, qy / qz * rng.random_range(1.1..3.0)),
    }
    .ok()?;
    if tuner::evaluate(&network, &evidence, &constraint)
        .ok()?
        .satisfied
    {
        return None;
    }
    Some((network, evidence, constraint))
}

/// Tuner output against a search over a grid of parameter values: every
/// parameter the grid can use to enforce the constraint is recommended, no
/// grid value enforces it with a smaller change, and each recommendation
/// verifies by re-inference.
pub fn tuner_completeness<R: Rng + ?Sized>(
    rng: &mut R,
    cases: usize,
    max_nodes: usize,
) -> SuiteReport {
    let mut report = SuiteReport::new("tuner completeness vs grid search");
    let steps = (1.0 / GRID_STEP).round() as usize;
    let grid: Vec<f64> = (1..steps).map(|k| k as f64 * GRID_STEP).collect();
    while report.cases < cases {
        let Some((n, e, c)) = violated_instance(rng, max_nodes) else {
            continue;
        };
        let analysis = match tuner::analyze(&n, &e, &c) {
            Ok(a) => a,
            Err(err) => {
                report.cases += 1;
                report.failures.push(format!("{c} | {e}: {err}"));
                continue;
            }
        };
        report.cases += 1;
        for a in &analysis.assessments {
            let enforcing: Vec<f64> = grid
                .iter()
                .copied()
                .filter(|&t| {
                    n.apply_change_at(a.location, t)
                        .and_then(|m| tuner::evaluate(&m, &e, &c))
                        .is_ok_and(|v| v.slack >= 0.0)
                })
                .collect();
            let nearest = enforcing
                .iter()
                .map(|t| (t - a.tau).abs())
                .min_by(f64::total_cmp);
            let rec = analysis
                .recommendations
                .iter()
                .find(|r| r.location == a.location);
            let case = || format!("{c} | {e}, {}", a.label);
            match (rec, nearest) {
                (Some(rec), nearest) => {
                    if a.verdict != Verdict::Enforces {
                        report.failures.push(format!(
                            "{}: recommended with verdict {:?}",
                            case(),
                            a.verdict
                        ));
                    }
                    match tuner::verify(&n, &e, &c, rec) {
                        Ok(v) if v.satisfied => {}
                        other => report
                            .failures
                            .push(format!("{}: does not verify: {other:?}", case())),
                    }
                    if let Some(d) = nearest {
                        // No grid value beats the minimal change; the grid
                        // gets within one step of it.
                        let gap = d - rec.minimal_delta.abs();
                        report.record(gap.abs(), (-1e-9..=GRID_STEP + 1e-9).contains(&gap), || {
                            format!(
                                "{}: grid distance {d} vs minimal {}",
                                case(),
                                rec.minimal_delta
                            )
                        });
                    }
                }
                (None, Some(d)) => report.failures.push(format!(
                    "{}: grid enforces at distance {d} but nothing was recommended ({:?})",
                    case(),
                    a.verdict
                )),
                (None, None) => {}
            }
        }
    }
    report
}
