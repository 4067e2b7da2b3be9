use std::process::{Command, Output};

fn pushcell(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pushcell")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn field(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"))
        .parse()
        .unwrap()
}

#[test]
fn thresholds_on_the_default_scenario() {
    let text = stdout(&pushcell(&["thresholds"]));
    assert_eq!(field(&text, "c_thr_ee"), 15.0);
    assert_eq!(field(&text, "m_thr_ee"), 5.0);
    assert!((field(&text, "theorem2_blocking") - 0.010384391264009874).abs() < 1e-12);

    let text = stdout(&pushcell(&["thresholds", "--set", "p_c=0.6"]));
    assert_eq!(field(&text, "c_thr_po"), 6.0);
}

#[test]
fn solved_policy_round_trips_through_analyze() {
    let dir = std::env::temp_dir().join(format!("pushcell-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let file = dir.join("optimal.policy");
    let file = file.to_str().unwrap();
    let scenario = ["--set", "e_max=12", "--set", "classes=2", "--set", "n=6", "--set", "p_c=0.5"];

    let mut args = vec!["solve"];
    args.extend(scenario);
    args.extend(["--policy-out", file]);
    let gain = field(&stdout(&pushcell(&args)), "gain");

    let mut args = vec!["analyze"];
    args.extend(scenario);
    args.extend(["--policy-file", file]);
    let blocking = field(&stdout(&pushcell(&args)), "blocking");
    assert!((gain - blocking).abs() < 1e-10, "gain {gain} blocking {blocking}");

    // A policy file for other dimensions is refused.
    let out = pushcell(&["analyze", "--set", "e_max=13", "--set", "classes=2", "--set", "n=6", "--policy-file", file]);
    assert!(!out.status.success());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn sweep_csv_is_reproducible() {
    let args = [
        "sweep", "--preset", "fig4", "--set", "values=0.3", "--set", "e_max=15", "--set", "methods=fsmc,mc",
        "--set", "slots=20000", "--set", "seed=9",
    ];
    let first = stdout(&pushcell(&args));
    let second = stdout(&pushcell(&args));
    assert_eq!(first, second);
    let mut lines = first.lines();
    assert_eq!(
        lines.next().unwrap(),
        "sweep_param,sweep_value,policy,method,blocking,ci_radius,c_thr,m_thr,seed,slots"
    );
    assert_eq!(lines.count(), 10);
}

#[test]
fn invalid_input_exits_nonzero() {
    for args in [
        vec!["thresholds", "--set", "bogus=1"],
        vec!["sweep", "--preset", "fig9"],
        vec!["sweep", "--set", "sweep=radius"],
        vec!["analyze", "--policy", "nope"],
        vec!["thresholds", "--set", "p_u=1.5"],
    ] {
        let out = pushcell(&args);
        assert!(!out.status.success(), "{args:?} succeeded");
        assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    }
}
