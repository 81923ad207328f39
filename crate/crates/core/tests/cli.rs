use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use invtori::fixtures::{fixture, FIXTURE_NAMES};

fn invtori(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_invtori"))
        .args(args)
        .arg("--output-dir")
        .arg(out)
        .env_remove("INVTORI_OUTPUT_DIR")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn summary(dir: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join("summary.json")).unwrap()).unwrap()
}

fn without_meta(dir: &Path) -> Value {
    let mut v = summary(dir);
    v.as_object_mut().unwrap().remove("meta");
    v
}

fn check<'a>(s: &'a Value, name: &str) -> &'a Value {
    s["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap_or_else(|| panic!("no check {name}"))
}

#[test]
fn identical_runs_give_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["extend", "sine-0.05", "--samples", "20", "--seed", "11"];
    assert_eq!(code(&invtori(&args, dir.path())), 0);
    let first = without_meta(dir.path());
    let csv = std::fs::read(dir.path().join("extension.csv")).unwrap();
    assert_eq!(code(&invtori(&args, dir.path())), 0);
    assert_eq!(first, without_meta(dir.path()));
    assert_eq!(csv, std::fs::read(dir.path().join("extension.csv")).unwrap());

    let other = tempfile::tempdir().unwrap();
    assert_eq!(code(&invtori(&["extend", "sine-0.05", "--samples", "20", "--seed", "12"], other.path())), 0);
    assert_ne!(check(&first, "symplectic")["value"], check(&without_meta(other.path()), "symplectic")["value"]);
}

#[test]
fn exit_codes_follow_the_outcome() {
    let dir = tempfile::tempdir().unwrap();
    let ok = invtori(&["homology"], dir.path());
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("wrote"));

    let failed = invtori(&["homology", "--matrix", "2,0,0,1"], dir.path());
    assert_eq!(code(&failed), 1);
    assert_eq!(summary(dir.path())["passed"], false);
    assert_eq!(check(&summary(dir.path()), "unimodular")["passed"], false);

    assert_eq!(code(&invtori(&["analyze", "no-such-fixture"], dir.path())), 2);
    assert_eq!(code(&invtori(&["homology", "--matrix", "1,2,3"], dir.path())), 2);
    assert_eq!(code(&invtori(&["extend", "cubic"], dir.path())), 2);
    assert_eq!(code(&invtori(&["frobnicate"], dir.path())), 2);
    let missing = dir.path().join("missing.toml");
    assert_eq!(code(&invtori(&["--config", missing.to_str().unwrap(), "run"], dir.path())), 2);
}

#[test]
fn report_reprints_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&invtori(&["homology", "--matrix", "0,-1,1,0"], dir.path())), 0);
    let out = Command::new(env!("CARGO_BIN_EXE_invtori"))
        .args(["report", "--dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("classification"));
    let empty = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_invtori")).args(["report", "--dir"]).arg(empty.path()).output().unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn config_file_then_environment_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    let from_file = dir.path().join("file");
    let from_env = dir.path().join("env");
    let from_flag = dir.path().join("flag");
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "[run]\noperation = \"extend\"\nseed = 4\noutput_dir = {:?}\n\n[extend]\nbasemap = \"translation(0.1, 0.2)\"\nsamples = 10\n",
            from_file.to_str().unwrap()
        ),
    )
    .unwrap();
    let run = |env: Option<&Path>, flag: Option<&Path>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_invtori"));
        c.arg("--config").arg(&cfg).arg("run").env_remove("INVTORI_OUTPUT_DIR");
        if let Some(e) = env {
            c.env("INVTORI_OUTPUT_DIR", e);
        }
        if let Some(f) = flag {
            c.arg("--output-dir").arg(f);
        }
        c.output().unwrap()
    };
    assert_eq!(code(&run(None, None)), 0);
    let s = summary(&from_file);
    assert_eq!(s["seed"], 4);
    assert_eq!(check(&s, "closed-form")["passed"], true);
    assert_eq!(code(&run(Some(&from_env), None)), 0);
    assert!(from_env.join("summary.json").exists());
    assert_eq!(code(&run(Some(&from_env), Some(&from_flag))), 0);
    assert!(from_flag.join("summary.json").exists());

    std::fs::write(&cfg, "[run]\noperation = \"extend\"\n[extend]\nbasmap = \"identity\"\n").unwrap();
    let bad = run(None, Some(&from_flag));
    assert_eq!(code(&bad), 2);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("basmap"));
}

#[test]
fn every_fixture_passes_analysis_with_audited_expectations() {
    for name in FIXTURE_NAMES {
        let fx = fixture(name).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = invtori(&["analyze", name], dir.path());
        assert_eq!(code(&out), 0, "{name}: {}", String::from_utf8_lossy(&out.stdout));
        let s = summary(dir.path());
        for c in s["checks"].as_array().unwrap() {
            let key = c["name"].as_str().unwrap().replace('-', "_");
            assert!(
                fx.rationale.iter().any(|(k, why)| *k == key && !why.trim().is_empty()),
                "{name}: check {key} has no rationale"
            );
        }
        assert!(dir.path().join("samples.csv").exists());
    }
}

#[test]
fn operations_write_their_csv_files() {
    let cases: [(&[&str], &str); 5] = [
        (&["flow", "herman", "--t", "2"], "trajectory.csv"),
        (&["conjugate", "prop-p1-torus", "--T", "5"], "conjugate.csv"),
        (&["characteristic", "prop-p1-torus", "--theta0", "0,0,0", "--t", "1"], "characteristic.csv"),
        (&["extend", "identity", "--samples", "5"], "extension.csv"),
        (&["homology", "--matrix", "1,1,0,1", "--v0", "0,1", "--n", "10"], "homology.csv"),
    ];
    for (args, file) in cases {
        let dir = tempfile::tempdir().unwrap();
        let out = invtori(args, dir.path());
        assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stdout));
        let text = std::fs::read_to_string(dir.path().join(file)).unwrap();
        assert!(text.lines().count() > 1, "{file} empty");
        assert!(summary(dir.path())["files"].as_array().unwrap().iter().any(|f| f == file));
    }
}
