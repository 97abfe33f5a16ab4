use std::process::Command;

use ergoharris::experiment::ExperimentConfig;
use proptest::prelude::*;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ergoharris"))
}

proptest! {
    #[test]
    fn config_round_trips(
        seed in any::<u64>(),
        samples in 1usize..100_000,
        params in prop::collection::btree_map("[a-z][a-z_]{0,8}", "[a-z0-9.;:,*^-]{1,12}", 0..6),
        tols in prop::collection::btree_map("[a-z][a-z_]{0,8}", -1e6..1e6f64, 0..4),
    ) {
        let mut c = ExperimentConfig::new("binding", seed, samples);
        c.params = params;
        c.tolerances = tols;
        prop_assert_eq!(ExperimentConfig::parse(&c.emit()).unwrap(), c);
    }
}

#[test]
fn unknown_experiment_exits_with_error_code() {
    let out = bin()
        .args(["sdde", "--experiment", "nonsense"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonsense"));
}

#[test]
fn passing_run_writes_bundle_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("binding.toml");
    std::fs::write(
        &cfg,
        "experiment = binding\nseed = 3\nsamples = 20\n[params]\nT = 0.5\ndt = 0.01\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let status = bin()
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(json["config"]["experiment"], "binding");
    assert!(out_dir.join("decay.csv").exists());
}

#[test]
fn failed_certificate_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    };
    // the identity kernel never contracts the discrete distance
    let k = write("k.txt", "2\n1 0\n0 1\n");
    let d = write("d.txt", "2\n0 0.5\n0.5 0\n");
    let v = write("v.txt", "2\n0 1\n");
    let out = bin()
        .arg("certify")
        .arg("--kernel")
        .arg(&k)
        .arg("--distance")
        .arg(&d)
        .arg("--lyapunov")
        .arg(&v)
        .args(["--t-star", "5"])
        .output()
        .unwrap();
    assert!(
        matches!(out.status.code(), Some(1) | Some(3)),
        "status {:?}",
        out.status
    );
}

#[test]
fn thread_count_does_not_change_output() {
    let run = |threads: &str| {
        let out = bin()
            .env("ERGOHARRIS_THREADS", threads)
            .args([
                "sdde",
                "--experiment",
                "convolution",
                "--samples",
                "200",
                "--seed",
                "4",
            ])
            .output()
            .unwrap();
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        (
            v["checks"].clone(),
            v["statistics"].clone(),
            v["tables"].clone(),
        )
    };
    assert_eq!(run("1"), run("3"));
}
