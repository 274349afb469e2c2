use std::path::Path;
use std::process::Command;

fn schedleak() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_schedleak"));
    cmd.env("SCHED_LEAK_THREADS", "2");
    cmd
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn privacy_subcommand_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "acc.json",
        r#"{"experiment":"privacy","policy":{"kind":"accumulate_serve","period":10},
            "rates":[0.2],"clock_period":2,"horizon":5000,"replications":5,"seed":3}"#,
    );
    let out = dir.path().join("report.csv");
    let status = schedleak()
        .args(["privacy", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--replications", "8", "--check"])
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("policy,metric,empirical,stderr,closed_form,bound_kind"));
    let row = lines.next().unwrap();
    assert!(row.starts_with("accumulate_serve,mse_genie,"), "{row}");
    assert!(row.contains(",exact,8,"), "{row}");
}

#[test]
fn attack_demo_prints_cases() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "demo.json",
        r#"{"experiment":"attack-demo","policy":{"kind":"fcfs"},"rates":[0.2],
            "clock_period":2,"horizon":8,"replications":2,"seed":1,
            "target_arrivals":[0.35,2.9,2.95]}"#,
    );
    let out = schedleak()
        .args(["attack-demo", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("delayed"));
    assert!(text.contains("backlogged"));
    assert!(text.contains("idle"));
}

#[test]
fn check_flag_fails_on_band_violation() {
    let dir = tempfile::tempdir().unwrap();
    // The closed-form accumulate-and-serve delay bound omits the wait for the
    // batch to seal, so the measured delay exceeds it.
    let cfg = write_config(
        dir.path(),
        "acc_delay.json",
        r#"{"experiment":"delay","policy":{"kind":"accumulate_serve","period":5},
            "rates":[0.325,0.325],"clock_period":2,"horizon":20000,"warmup":2000,
            "replications":4,"seed":9}"#,
    );
    let status = schedleak().args(["delay", "--config"]).arg(&cfg).status().unwrap();
    assert!(status.success(), "without --check the run itself succeeds");
    let status = schedleak()
        .args(["delay", "--check", "--config"])
        .arg(&cfg)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn bad_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.json",
        r#"{"experiment":"delay","policy":{"kind":"fcfs"},"rates":[0.6,0.6],
            "clock_period":2,"horizon":100,"replications":4,"seed":9}"#,
    );
    let out = schedleak().args(["delay", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("unstable"));
    let out = schedleak().args(["privacy", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn builtin_check_suite_passes() {
    let status = schedleak()
        .args(["check", "--replications", "10", "--seed", "4"])
        .status()
        .unwrap();
    assert!(status.success());
}
