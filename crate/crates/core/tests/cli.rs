use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use magnotransfer_core::cli;

fn run(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut argv = vec!["magnotransfer"];
    argv.extend_from_slice(args);
    let code = cli::run(argv, &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

const LIGHT: [&str; 5] = [
    "scan.points=5",
    "sweep.resolution=3",
    "lindblad.temperatures=0.1",
    "lindblad.steps=200",
    "steps.refine=false",
];

fn preset_args<'a>(name: &'a str, out: &'a str) -> Vec<&'a str> {
    let mut args = vec!["preset", name, "--out", out];
    let light: &[&str] = match name {
        "fig4" | "fig6" => &LIGHT[0..1],
        "fig5" => &LIGHT[1..2],
        "fig7" => &LIGHT[2..4],
        _ => &[],
    };
    for s in light {
        args.push("--set");
        args.push(s);
    }
    args.push("--set");
    args.push(LIGHT[4]);
    args
}

#[test]
fn presets_round_trip_through_their_effective_config() {
    for name in [
        "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "custom",
    ] {
        let tmp = tempfile::tempdir().unwrap();
        let first = tmp.path().join("first");
        let second = tmp.path().join("second");
        let first_s = first.to_str().unwrap();
        let (code, _) = run(&preset_args(name, first_s));
        assert_eq!(code, 0, "{name}");
        let dump = first.join("effective_config.txt");
        let (code, _) = run(&[
            "run",
            dump.to_str().unwrap(),
            "--out",
            second.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{name} rerun");
        let a = read_dir(&first);
        let b = read_dir(&second);
        assert_eq!(
            a.keys().collect::<Vec<_>>(),
            b.keys().collect::<Vec<_>>(),
            "{name}"
        );
        for (file, bytes) in &a {
            assert!(bytes == &b[file], "{name}: {file} differs");
        }
        assert!(a.contains_key("summary.json"));
        assert!(a.keys().any(|k| k.starts_with("schedule_")), "{name}");
    }
}

#[test]
fn identical_configs_give_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.cfg");
    fs::write(
        &cfg,
        "scenario = custom\nprotocol.kind = tqd\ninitial = cat 1\nerrors.gamma = 0.1\n\
         sweep.resolution = 3\nscan.points = 4\nsteps = 500\n",
    )
    .unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(
        run(&[
            "--threads",
            "3",
            "run",
            cfg.to_str().unwrap(),
            "--out",
            a.to_str().unwrap()
        ])
        .0,
        0
    );
    assert_eq!(
        run(&["run", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()]).0,
        0
    );
    assert_eq!(read_dir(&a), read_dir(&b));
    let csv = String::from_utf8(read_dir(&a)["sweep.csv"].clone()).unwrap();
    assert!(csv.ends_with('\n'));
    let first_row = csv.lines().nth(1).unwrap();
    assert_eq!(first_row.split(',').next().unwrap(), "-2.00000000000e-1");
}

#[test]
fn fig2_summary_headlines() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("f2");
    let (code, stdout) = run(&["preset", "fig2", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    let with = v["headline"]["P_with_CD"].as_f64().unwrap();
    let without = v["headline"]["P_without_CD"].as_f64().unwrap();
    assert!(with >= 0.999);
    assert!((without - 0.97).abs() <= 0.01);
    let on_disk: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(v, on_disk);
}

#[test]
fn custom_pi_pulse_on_fock_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.cfg");
    fs::write(
        &cfg,
        "scenario = custom\nprotocol.kind = pi_pulse\ninitial = fock 2\n",
    )
    .unwrap();
    let (code, stdout) = run(&[
        "run",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert!((v["headline"]["P"].as_f64().unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.cfg");
    assert_eq!(run(&["run", missing.to_str().unwrap()]).0, cli::EXIT_CONFIG);

    let bad = tmp.path().join("bad.cfg");
    fs::write(&bad, "scenario = fig2\nlindblad.temperatures = -1\n").unwrap();
    assert_eq!(run(&["run", bad.to_str().unwrap()]).0, cli::EXIT_CONFIG);

    fs::write(&bad, "scenario = custom\n").unwrap();
    assert_eq!(run(&["run", bad.to_str().unwrap()]).0, cli::EXIT_CONFIG);

    assert_eq!(run(&["preset", "fig42"]).0, cli::EXIT_CONFIG);
    assert_eq!(run(&["frobnicate"]).0, cli::EXIT_CONFIG);

    let numeric = tmp.path().join("num.cfg");
    fs::write(
        &numeric,
        "scenario = custom\nprotocol.kind = pi_pulse\ninitial = fock 3\ncutoff = 2\n",
    )
    .unwrap();
    let out = tmp.path().join("n");
    assert_eq!(
        run(&[
            "run",
            numeric.to_str().unwrap(),
            "--out",
            out.to_str().unwrap()
        ])
        .0,
        cli::EXIT_NUMERIC
    );
    assert!(!out.exists(), "no partial output on failure");
}

#[test]
fn schedule_dump_is_csv() {
    let (code, out) = run(&[
        "schedule",
        "lr_optimized",
        "--dump",
        "--set",
        "schedule.samples=10",
    ]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "t,delta,g_real,g_imag,theta_dot");
    assert_eq!(lines.len(), 12);
    let (code, meta) = run(&["schedule", "tqd"]);
    assert_eq!(code, 0);
    assert!(meta.contains("tqd"));
    assert_eq!(run(&["schedule", "square"]).0, cli::EXIT_CONFIG);
}

#[test]
fn sensitivity_reports_analytic_values() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("s.cfg");
    fs::write(
        &cfg,
        "scenario = custom\nprotocol.kind = pi_pulse\ninitial = fock 1\n",
    )
    .unwrap();
    let (code, out) = run(&["sensitivity", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let analytic = v["analytic_pi_pulse"].as_f64().unwrap();
    let numeric = v["numeric"]["q_g"].as_f64().unwrap();
    assert!((analytic - std::f64::consts::PI.powi(2) / 4.0).abs() < 1e-12);
    assert!((numeric - analytic).abs() / analytic < 0.02);
    assert!(v["analytic_lr"].is_null());

    fs::write(&cfg, "scenario = fig3\nsteps.refine = false\n").unwrap();
    let (code, out) = run(&["sensitivity", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["analytic_lr"][0].as_f64().unwrap() < 1e-10);
}

#[test]
fn validate_prints_effective_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("v.cfg");
    fs::write(&cfg, "scenario = fig5\n").unwrap();
    let (code, out) = run(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.contains("sweep.resolution = 41"));
    assert!(out.contains("initial = cat 1.0"));
}
