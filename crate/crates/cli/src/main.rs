//! `belief-tuner`: query, tune and bound discrete belief networks.
//!
//! Exit status: 0 on success, 1 when the model rejects the request (invalid
//! network, impossible evidence, unenforceable constraint), 2 on usage
//! errors. Results go to stdout, diagnostics to stderr.

use std::fmt;
use std::io::{self, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use belief_tuner::bounds;
use belief_tuner::selfcheck;
use belief_tuner::{grammar, tuner, Error as ModelError, Evidence, Network, Recommendation};
use clap::{ArgGroup, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SEED_VAR: &str = "BELIEF_TUNER_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "belief-tuner",
    version,
    about = "Tune and bound belief network parameters"
)]
struct Cli {
    /// Network document (JSON).
    #[arg(short = 'n', long, global = true, value_name = "FILE")]
    network: Option<PathBuf>,

    /// Evidence as comma-separated VAR=STATE pairs.
    #[arg(
        short = 'e',
        long,
        global = true,
        value_name = "SPEC",
        default_value = ""
    )]
    evidence: String,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Posterior of one event given the evidence.
    Query {
        /// VAR=STATE
        #[arg(short = 't', long)]
        target: String,
    },
    /// Single-parameter changes that enforce a constraint.
    Recommend {
        /// e.g. "P(fire=true) >= 0.5" or "P(a=x) - P(a=y) >= 0.3"
        #[arg(short = 'c', long)]
        constraint: String,
    },
    /// Permissible-change envelopes as CSV.
    Envelope {
        /// Current query value.
        #[arg(long)]
        q0: f64,
        /// Band the query must stay in, as LOW:HIGH.
        #[arg(long)]
        band: String,
        /// Spacing of the parameter grid.
        #[arg(long, default_value_t = 0.01)]
        step: f64,
    },
    /// Closed-form sensitivity bounds.
    #[command(group(ArgGroup::new("mode").required(true).args(
        ["derivative", "interval", "root_change", "sensitivity", "lower_bound"]
    )))]
    Bound {
        /// Largest |dPr(y|e)/dτ| given -q and -p.
        #[arg(long)]
        derivative: bool,
        /// Range of a query at -q when a parameter moves from -p to --p-new.
        #[arg(long)]
        interval: bool,
        /// New root prior moving its posterior from --posterior to --target.
        #[arg(long)]
        root_change: bool,
        /// Relative sensitivity factor (1 - q)/(1 - p), for p <= 0.5.
        #[arg(long)]
        sensitivity: bool,
        /// Smallest log-odds change of -p that moves a query from -q to --q-target.
        #[arg(long)]
        lower_bound: bool,
        #[arg(short = 'q', allow_negative_numbers = true)]
        q: Option<f64>,
        #[arg(short = 'p', allow_negative_numbers = true)]
        p: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        p_new: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        q_target: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        prior: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        posterior: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        target: Option<f64>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = belief_tuner_service::DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Directory that export requests also write version files to.
        #[arg(long)]
        export_dir: Option<PathBuf>,
    },
    /// Randomized checks against brute-force references. The seed comes
    /// from BELIEF_TUNER_SEED.
    Selftest {
        #[arg(long, default_value_t = 50)]
        cases: usize,
    },
}

/// A mistake in the invocation rather than in the model.
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(message: impl Into<String>) -> anyhow::Error {
    Usage(message.into()).into()
}

/// Errors in names, specs and arguments are usage errors; everything else
/// the model rejects is a failure.
fn exit_code(err: &anyhow::Error) -> u8 {
    if err.is::<Usage>() {
        return 2;
    }
    match err.downcast_ref::<ModelError>() {
        Some(
            ModelError::Grammar { .. }
            | ModelError::UnknownVariable(_)
            | ModelError::UnknownState { .. }
            | ModelError::DuplicateAssignment(_)
            | ModelError::QueryInEvidence(_)
            | ModelError::InvalidArgument(_)
            | ModelError::InvalidConstraint(_)
            | ModelError::OutOfRange { .. },
        ) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Query { ref target } => {
            let (network, evidence) = load(&cli)?;
            let target = grammar::parse_event(target)?;
            let q = belief_tuner::posterior(&network, &target, &evidence)?;
            match cli.format {
                Format::Text => writeln!(out, "{q:.6}")?,
                Format::Csv => write!(out, "target,posterior\n{target},{q:.6}\n")?,
            }
            Ok(0)
        }
        Command::Recommend { ref constraint } => {
            let (network, evidence) = load(&cli)?;
            let constraint = grammar::parse_constraint(constraint)?;
            let report = tuner::analyze(&network, &evidence, &constraint)?;
            if !report.already_satisfied && report.recommendations.is_empty() {
                return Err(anyhow!("no single parameter change enforces {constraint}"));
            }
            if report.already_satisfied {
                eprintln!("{constraint} already holds");
            }
            write_recommendations(&mut out, cli.format, &report.recommendations)?;
            Ok(0)
        }
        Command::Envelope { q0, ref band, step } => {
            let (lo, hi) = parse_band(band)?;
            if !(step > 0.0 && step < 1.0) {
                return Err(usage(format!("step {step} must lie in (0, 1)")));
            }
            let grid = bounds::probability_grid(step).map_err(|e| usage(e.to_string()))?;
            let points = bounds::envelope(q0, lo, hi, &grid).map_err(|e| usage(e.to_string()))?;
            out.write_all(bounds::envelope_csv(&points).as_bytes())?;
            Ok(0)
        }
        Command::Bound {
            derivative,
            interval,
            root_change,
            sensitivity,
            lower_bound,
            q,
            p,
            p_new,
            q_target,
            prior,
            posterior,
            target,
        } => {
            let need =
                |v: Option<f64>, flag: &str| v.ok_or_else(|| usage(format!("{flag} is required")));
            let csv = cli.format == Format::Csv;
            if derivative {
                let b = bounds::derivative_bound(need(q, "-q")?, need(p, "-p")?)?;
                write_scalar(&mut out, csv, "derivative_bound", b)?;
            } else if interval {
                let budget = bounds::log_odds_distance(need(p, "-p")?, need(p_new, "--p-new")?)?;
                let iv = bounds::query_interval(need(q, "-q")?, budget)?;
                if csv {
                    write!(out, "low,high\n{:.6},{:.6}\n", iv.low, iv.high)?;
                } else {
                    writeln!(out, "[{:.6}, {:.6}]", iv.low, iv.high)?;
                }
            } else if root_change {
                let t = bounds::exact_root_change(
                    need(prior, "--prior")?,
                    need(posterior, "--posterior")?,
                    need(target, "--target")?,
                )?;
                write_scalar(&mut out, csv, "new_prior", t)?;
            } else if sensitivity {
                let f = bounds::sensitivity_factor(need(q, "-q")?, need(p, "-p")?)?;
                write_scalar(&mut out, csv, "sensitivity_factor", f)?;
            } else if lower_bound {
                let lb = bounds::param_change_lower_bound(
                    need(q, "-q")?,
                    need(q_target, "--q-target")?,
                    need(p, "-p")?,
                )?;
                if csv {
                    write!(
                        out,
                        "log_odds,nearest_tau\n{:.6},{:.6}\n",
                        lb.budget.value(),
                        lb.nearest_tau
                    )?;
                } else {
                    writeln!(
                        out,
                        "log_odds {:.6} nearest_tau {:.6}",
                        lb.budget.value(),
                        lb.nearest_tau
                    )?;
                }
            }
            Ok(0)
        }
        Command::Serve {
            port,
            host,
            export_dir,
        } => {
            let addr = SocketAddr::new(host, port);
            let config = belief_tuner_service::ServiceConfig {
                export_dir,
                ..Default::default()
            };
            let runtime = tokio::runtime::Runtime::new()?;
            eprintln!("listening on http://{addr}/api/v1/");
            runtime
                .block_on(belief_tuner_service::serve(addr, config))
                .with_context(|| format!("serving on {addr}"))?;
            Ok(0)
        }
        Command::Selftest { cases } => {
            let seed = match std::env::var(SEED_VAR) {
                Ok(raw) => raw.trim().parse::<u64>().map_err(|_| {
                    usage(format!(
                        "{SEED_VAR} must be an unsigned integer, got `{raw}`"
                    ))
                })?,
                Err(_) => 0,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let reports = [
                selfcheck::oracle_equivalence(&mut rng, cases),
                selfcheck::derivative_agreement(&mut rng, cases),
                selfcheck::log_odds_containment(&mut rng, cases),
                selfcheck::tuner_completeness(&mut rng, cases.div_ceil(10), 8),
            ];
            writeln!(out, "seed {seed}")?;
            let mut ok = true;
            for r in &reports {
                writeln!(out, "{} {r}", if r.passed() { "PASS" } else { "FAIL" })?;
                for f in &r.failures {
                    eprintln!("  {f}");
                }
                ok &= r.passed();
            }
            Ok(if ok { 0 } else { 1 })
        }
    }
}

fn load(cli: &Cli) -> anyhow::Result<(Network, Evidence)> {
    let path = cli
        .network
        .as_deref()
        .ok_or_else(|| usage("this command needs -n/--network FILE"))?;
    let network = read_network(path)?;
    let evidence = grammar::parse_evidence(&cli.evidence)?;
    // Check names up front so a typo is reported as such.
    evidence.resolve(&network)?;
    Ok((network, evidence))
}

fn read_network(path: &Path) -> anyhow::Result<Network> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("reading {}: {e}", path.display())))?;
    Network::parse(&text).with_context(|| format!("in {}", path.display()))
}

fn parse_band(band: &str) -> anyhow::Result<(f64, f64)> {
    let bad = || usage(format!("band `{band}` must be LOW:HIGH"));
    let (lo, hi) = band.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(0.0 < lo && lo < hi && hi < 1.0) {
        return Err(usage(format!(
            "band `{band}` must satisfy 0 < LOW < HIGH < 1"
        )));
    }
    Ok((lo, hi))
}

fn write_scalar(out: &mut impl Write, csv: bool, name: &str, value: f64) -> io::Result<()> {
    if csv {
        write!(out, "{name}\n{value:.6}\n")
    } else {
        writeln!(out, "{value:.6}")
    }
}

const COLUMNS: [&str; 5] = [
    "parameter",
    "current",
    "suggested",
    "delta",
    "log_odds_distance",
];

fn row(rec: &Recommendation) -> [String; 5] {
    [
        rec.label.clone(),
        format!("{:.6}", rec.current_tau),
        format!("{:.6}", rec.new_tau),
        format!("{:+.6}", rec.minimal_delta),
        rec.log_odds_distance
            .map_or_else(|| "inf".to_owned(), |d| format!("{d:.6}")),
    ]
}

fn write_recommendations(
    out: &mut impl Write,
    format: Format,
    recs: &[Recommendation],
) -> anyhow::Result<()> {
    let rows: Vec<[String; 5]> = recs.iter().map(row).collect();
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(COLUMNS)?;
            for r in &rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        Format::Text => {
            let mut widths = COLUMNS.map(str::len);
            for r in &rows {
                for (w, cell) in widths.iter_mut().zip(r) {
                    *w = (*w).max(cell.chars().count());
                }
            }
            let line = |cells: [&str; 5]| {
                let mut s = String::new();
                for (i, (cell, w)) in cells.iter().zip(widths).enumerate() {
                    if i == 0 {
                        s.push_str(&format!("{cell:<w$}"));
                    } else {
                        s.push_str(&format!("  {cell:>w$}"));
                    }
                }
                s.truncate(s.trim_end().len());
                s
            };
            writeln!(out, "{}", line(COLUMNS))?;
            for r in &rows {
                writeln!(
                    out,
                    "{}",
                    line([&r[0], &r[1], &r[2], &r[3], &r[4]].map(String::as_str))
                )?;
            }
        }
    }
    Ok(())
}
