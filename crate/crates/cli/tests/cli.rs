use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture() -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures/fire_alarm.json")
        .to_string_lossy()
        .into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_belief-tuner"))
        .args(args)
        .env_remove("BELIEF_TUNER_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn query_examples() {
    let n = fixture();
    let o = run(&[
        "query",
        "-n",
        &n,
        "-e",
        "report=true,smoke=false",
        "-t",
        "tampering=true",
    ]);
    assert_eq!(code(&o), 0);
    let q: f64 = stdout(&o).trim().parse().unwrap();
    assert!((q - 0.50).abs() < 0.005);
    assert_eq!(stdout(&o).trim().split('.').nth(1).unwrap().len(), 6);

    let o = run(&["query", "-n", &n, "-t", "fire=true"]);
    assert_eq!(stdout(&o), "0.010000\n");

    // Global flags may also come before the subcommand.
    let o = run(&["-n", &n, "--format", "csv", "query", "-t", "fire=true"]);
    assert_eq!(stdout(&o), "target,posterior\nfire=true,0.010000\n");
}

#[test]
fn unknown_state_is_a_usage_error_naming_it() {
    let o = run(&[
        "query",
        "-n",
        &fixture(),
        "-e",
        "report=maybe",
        "-t",
        "fire=true",
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("maybe"));
    assert!(o.stdout.is_empty());
}

#[test]
fn recommend_examples() {
    let n = fixture();
    let o = run(&[
        "recommend",
        "-n",
        &n,
        "-e",
        "report=true,smoke=false",
        "-c",
        "P(tampering=true) - P(tampering=false) >= .30",
    ]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 3, "{text}");
    assert!(lines[0].starts_with("parameter"));
    assert!(lines[1].starts_with("tampering=true "));
    assert!(lines[2].starts_with("report=true | leaving=false"));

    let o = run(&[
        "recommend",
        "-n",
        &n,
        "-e",
        "smoke=true,report=false",
        "-c",
        "P(fire=true) >= .5",
        "--format",
        "csv",
    ]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .unwrap()
        .iter()
        .map(str::to_owned)
        .collect();
    assert_eq!(
        headers,
        [
            "parameter",
            "current",
            "suggested",
            "delta",
            "log_odds_distance"
        ]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 5);
    // Sorted by log-odds distance.
    let lods: Vec<f64> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
    assert!(lods.windows(2).all(|w| w[0] <= w[1]), "{lods:?}");
}

#[test]
fn satisfied_constraint_prints_an_empty_table() {
    let o = run(&[
        "recommend",
        "-n",
        &fixture(),
        "-e",
        "report=true,smoke=false",
        "-c",
        "P(tampering=true) >= .4",
        "--format",
        "csv",
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        stdout(&o),
        "parameter,current,suggested,delta,log_odds_distance\n"
    );
}

#[test]
fn unenforceable_constraint_exits_1() {
    // No single change can make a difference of probabilities exceed 1.
    let o = run(&[
        "recommend",
        "-n",
        &fixture(),
        "-e",
        "report=true,smoke=false",
        "-c",
        "P(tampering=true) - P(fire=true) >= 1.5",
    ]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
}

#[test]
fn impossible_evidence_exits_1() {
    let dir = std::env::temp_dir().join(format!("belief-tuner-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("zero.json");
    std::fs::write(
        &path,
        r#"{"variables": [{"name": "a", "states": ["t", "f"], "parents": [], "cpt": [[1.0, 0.0]]},
                          {"name": "b", "states": ["t", "f"], "parents": [], "cpt": [[0.5, 0.5]]}]}"#,
    )
    .unwrap();
    let o = run(&[
        "query",
        "-n",
        path.to_str().unwrap(),
        "-e",
        "a=f",
        "-t",
        "b=t",
    ]);
    assert_eq!(code(&o), 1);

    std::fs::write(
        &path,
        r#"{"variables": [{"name": "a", "states": ["t"], "parents": ["a"], "cpt": [[1.0]]}]}"#,
    )
    .unwrap();
    let o = run(&["query", "-n", path.to_str().unwrap(), "-t", "a=t"]);
    assert_eq!(code(&o), 1, "invalid network is a validation failure");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn bound_examples() {
    assert_eq!(
        stdout(&run(&["bound", "--derivative", "-q", ".5", "-p", ".02"])),
        "12.755102\n"
    );

    let o = run(&[
        "bound",
        "--interval",
        "-q",
        ".029",
        "-p",
        ".02",
        "--p-new",
        ".036",
    ]);
    let text = stdout(&o);
    let inner = text.trim().trim_start_matches('[').trim_end_matches(']');
    let (lo, hi) = inner.split_once(", ").unwrap();
    let (lo, hi): (f64, f64) = (lo.parse().unwrap(), hi.parse().unwrap());
    assert!(
        (lo - 0.016).abs() < 0.002 && (hi - 0.053).abs() < 0.002,
        "{text}"
    );

    let o = run(&[
        "bound",
        "--root-change",
        "--prior",
        ".02",
        "--posterior",
        ".50",
        "--target",
        ".65",
    ]);
    assert!(stdout(&o).starts_with("0.036"), "{}", stdout(&o));

    let o = run(&["bound", "--sensitivity", "-q", ".5", "-p", ".02"]);
    assert_eq!(stdout(&o), "0.510204\n");
}

#[test]
fn envelope_rows() {
    let o = run(&[
        "envelope", "--q0", ".90", "--band", ".85:.95", "--step", ".01",
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().count(), 100);
}

/// Malformed invocations: every one is a usage error with nothing on stdout.
#[test]
fn malformed_invocations_exit_2() {
    let n = fixture();
    let cases: Vec<Vec<&str>> = vec![
        vec![],
        vec!["bogus"],
        vec!["query"],
        vec!["query", "-t", "fire=true"],
        vec!["query", "-n", "/nonexistent/net.json", "-t", "fire=true"],
        vec!["query", "-n", &n, "-t", "fire"],
        vec!["query", "-n", &n, "-t", "ghost=true"],
        vec!["query", "-n", &n, "-t", "fire=maybe"],
        vec![
            "query",
            "-n",
            &n,
            "-e",
            "fire=true,fire=false",
            "-t",
            "smoke=true",
        ],
        vec!["query", "-n", &n, "-e", "fire=true,", "-t", "smoke=true"],
        vec!["query", "-n", &n, "-e", "fire=true", "-t", "fire=true"],
        vec!["query", "-n", &n, "-t", "fire=true", "--format", "xml"],
        vec!["recommend", "-n", &n, "-c", "P(fire=true) > .5"],
        vec![
            "recommend",
            "-n",
            &n,
            "-c",
            "P(fire=true) - P(smoke=true) <= .5",
        ],
        vec!["recommend", "-n", &n, "-c", "P(fire=true) >= "],
        vec![
            "recommend",
            "-n",
            &n,
            "-c",
            "P(fire=true) / P(smoke=true) >= 0",
        ],
        vec!["envelope", "--q0", ".9", "--band", ".95:.85"],
        vec!["envelope", "--q0", ".9", "--band", ".85"],
        vec!["envelope", "--q0", ".5", "--band", ".85:.95"],
        vec!["envelope", "--q0", ".9", "--band", ".85:.95", "--step", "2"],
        vec!["envelope", "--q0", ".9", "--band", ".85:.95", "--step", "0"],
        vec!["envelope", "--q0", "x", "--band", ".85:.95"],
        vec!["bound"],
        vec!["bound", "--derivative"],
        vec![
            "bound",
            "--derivative",
            "--interval",
            "-q",
            ".5",
            "-p",
            ".1",
        ],
        vec!["bound", "--derivative", "-q", "1.5", "-p", ".1"],
        vec!["bound", "--derivative", "-q", ".5", "-p", "0"],
        vec!["bound", "--interval", "-q", ".5", "-p", ".1"],
        vec![
            "bound",
            "--root-change",
            "--prior",
            ".02",
            "--posterior",
            "1",
            "--target",
            ".5",
        ],
        vec!["bound", "--sensitivity", "-q", ".5", "-p", ".7"],
        vec!["serve", "--port", "99999"],
    ];
    for args in cases {
        let o = run(&args);
        assert_eq!(
            code(&o),
            2,
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(o.stdout.is_empty(), "{args:?}");
        assert!(!o.stderr.is_empty(), "{args:?}");
    }
}

#[test]
fn selftest_seed_handling() {
    let o = Command::new(env!("CARGO_BIN_EXE_belief-tuner"))
        .args(["selftest", "--cases", "5"])
        .env("BELIEF_TUNER_SEED", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);

    let seeded = |seed: &str| {
        Command::new(env!("CARGO_BIN_EXE_belief-tuner"))
            .args(["selftest", "--cases", "10"])
            .env("BELIEF_TUNER_SEED", seed)
            .output()
            .unwrap()
    };
    let (a, b) = (seeded("42"), seeded("42"));
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).starts_with("seed 42\n"));
    assert_eq!(stdout(&a).matches("PASS").count(), 4);
}

#[test]
fn outputs_are_byte_stable() {
    let n = fixture();
    let invocations: Vec<Vec<&str>> = vec![
        vec![
            "query",
            "-n",
            &n,
            "-e",
            "report=true,smoke=false",
            "-t",
            "tampering=true",
        ],
        vec![
            "recommend",
            "-n",
            &n,
            "-e",
            "smoke=true,report=false",
            "-c",
            "P(fire=true) >= .5",
        ],
        vec![
            "recommend",
            "-n",
            &n,
            "-e",
            "smoke=true,report=false",
            "-c",
            "P(fire=true) >= .5",
            "--format",
            "csv",
        ],
        vec![
            "envelope", "--q0", ".6", "--band", ".55:.65", "--step", ".05",
        ],
        vec![
            "bound",
            "--lower-bound",
            "-q",
            ".5",
            "--q-target",
            ".65",
            "-p",
            ".02",
        ],
    ];
    for args in invocations {
        let first = run(&args);
        assert_eq!(code(&first), 0, "{args:?}");
        for _ in 0..3 {
            assert_eq!(run(&args).stdout, first.stdout, "{args:?}");
        }
    }
}
