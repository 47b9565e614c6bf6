use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mg-lcb"))
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().unwrap()
}

fn ok(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    if out.stdout.is_empty() {
        serde_json::Value::Null
    } else {
        serde_json::from_slice(&out.stdout).unwrap()
    }
}

fn gen_hard(dir: &Path) {
    ok(&run(
        &[
            "gen-hard",
            "--S",
            "2",
            "--A",
            "4",
            "--B",
            "2",
            "--gamma",
            "0.8",
            "--eps",
            "0.1",
            "--c-clipped",
            "2",
            "--theta",
            "q,p,q,p",
            "--out",
            "inst",
        ],
        dir,
    ));
}

#[test]
fn pipeline_from_instance_to_evaluation() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    gen_hard(dir);
    for f in ["game.json", "rho.json", "d_b.json"] {
        assert!(dir.join("inst").join(f).exists(), "{f}");
    }
    ok(&run(
        &[
            "sample",
            "--game",
            "inst/game.json",
            "--d-b",
            "inst/d_b.json",
            "--n",
            "3000",
            "--seed",
            "9",
            "--out",
            "data.csv",
        ],
        dir,
    ));
    let csv = std::fs::read_to_string(dir.join("data.csv")).unwrap();
    assert!(csv.starts_with("s,a,b,s_next\n"));
    assert_eq!(csv.lines().count(), 3001);
    assert!(dir.join("data.csv.json").exists());

    ok(&run(
        &[
            "solve",
            "--game",
            "inst/game.json",
            "--dataset",
            "data.csv",
            "--include-q",
            "--out",
            "sol.json",
        ],
        dir,
    ));
    let sol: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("sol.json")).unwrap()).unwrap();
    assert_eq!(sol["iterations"], 44);
    assert!(sol["q_minus"].is_array() && sol["q_plus"].is_array());
    assert_eq!(sol["mu_hat"]["side"], "max");

    let report = ok(&run(
        &[
            "eval",
            "--game",
            "inst/game.json",
            "--rho",
            "inst/rho.json",
            "--solution",
            "sol.json",
            "--d-b",
            "inst/d_b.json",
        ],
        dir,
    ));
    let gap = report["gap"].as_f64().unwrap();
    assert!(gap >= -2e-8);
    assert!((report["concentrability_clipped"].as_f64().unwrap() - 2.0).abs() < 1e-6);
    assert_eq!(report["nash_source"], "solve_nash_exact");
}

#[test]
fn matrix_nash_reads_stdin() {
    let mut child = bin()
        .args(["matrix-nash", "--tol", "1e-9"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"[[3,1],[0,2]]")
        .unwrap();
    let cert = ok(&child.wait_with_output().unwrap());
    assert!((cert["value"].as_f64().unwrap() - 1.5).abs() <= 1e-9);
    assert!(cert["exploitability_gap"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn sweep_and_fit_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = r#"{"instance":{"hard":{"S":2,"A":4,"B":2,"gamma":0.8,"epsilon":0.1,"c_clipped":2.0,"theta":["q","q","p","p"]}},
                 "sample_sizes":[500,1000,2000],"seeds_per_size":2,"output_path":"s.csv"}"#;
    std::fs::write(dir.join("cfg.json"), cfg).unwrap();
    ok(&run(&["sweep", "--config", "cfg.json", "--seed", "3"], dir));
    let first = std::fs::read(dir.join("s.csv")).unwrap();
    assert!(dir.join("s.csv.json").exists());
    assert!(dir.join("s.csv.timing.csv").exists());
    ok(&run(&["sweep", "--config", "cfg.json", "--seed", "3"], dir));
    assert_eq!(first, std::fs::read(dir.join("s.csv")).unwrap());

    let fit = ok(&run(&["fit", "--input", "s.csv"], dir));
    assert!(fit["slope"].is_number());
}

#[test]
fn validation_and_numerical_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let bad_eps = run(
        &[
            "gen-hard",
            "--S",
            "2",
            "--A",
            "4",
            "--B",
            "2",
            "--gamma",
            "0.8",
            "--eps",
            "5",
            "--c-clipped",
            "2",
        ],
        dir,
    );
    assert_eq!(bad_eps.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_eps.stderr).contains("epsilon"));

    let missing = run(&["sweep"], dir);
    assert_eq!(missing.status.code(), Some(2));

    let unknown = run(&["no-such-command"], dir);
    assert_eq!(unknown.status.code(), Some(2));

    // Every N has zero mean gap here, which the fit reports as numerical.
    let rows = "N,seed_index,seed,gap,v_star,v_mu_star,v_star_nu\n\
                10,0,1,0,1,1,1\n20,0,2,0,1,1,1\n40,0,3,0,1,1,1\n";
    std::fs::write(dir.join("zero.csv"), rows).unwrap();
    let fit = run(&["fit", "--input", "zero.csv"], dir);
    assert_eq!(fit.status.code(), Some(3));
}
