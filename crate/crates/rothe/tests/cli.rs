use std::fs;
use std::process::{Command, Output};

fn rothe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rothe")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn mesh_subcommand_writes_the_level() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = rothe(&["mesh", "--experiment", "singular", "--level", "3", "--out", d]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let mesh = rothe::mesh_io::parse(&fs::read_to_string(dir.path().join("mesh.txt")).unwrap()).unwrap();
    assert_eq!(mesh.num_cells(), 8 * 16);
}

#[test]
fn solve_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let run = dir.path().join("run");
    let text = format!(
        "experiment.kind = manufactured\nexperiment.family = mini\nmesh.level = 2\noutput.dir = {}\n",
        run.display()
    );
    fs::write(&cfg, text).unwrap();
    let out = rothe(&["solve", "--config", cfg.to_str().unwrap(), "--family", "taylor_hood"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let written = fs::read_to_string(run.join("config.txt")).unwrap();
    assert!(written.contains("experiment.family = taylor_hood\n"));
    assert!(written.contains("mesh.level = 2\n"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("n,h,e_L2,EOC_L2,e_F,EOC_F,EOC_tot"));
}

#[test]
fn config_errors_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "experiment.kind = singular\nmodel.q = 2\n").unwrap();
    let out = rothe(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    fs::write(&cfg, "experiment.kind = singular\nmodel.p = 0.5\n").unwrap();
    assert_eq!(code(&rothe(&["solve", "--config", cfg.to_str().unwrap()])), 3);
    assert_eq!(code(&rothe(&["solve", "--experiment", "cavity"])), 3);
    assert_eq!(code(&rothe(&["solve", "--family", "q2q1"])), 3);
}

#[test]
fn solver_failure_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tight.cfg");
    let text = format!(
        "experiment.kind = singular\ntime.steps = 3\ntime.t_end = 0.012\nnewton.max_iter = 1\nnewton.abs_tol = 1e-300\nnewton.rel_tol = 1e-300\noutput.dir = {}\n",
        dir.path().join("run").display()
    );
    fs::write(&cfg, text).unwrap();
    let out = rothe(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("run/energy.csv").exists());
}

#[test]
fn verify_writes_a_passing_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = rothe(&["verify", "--experiment", "vortex", "--out", d]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let csv = fs::read_to_string(dir.path().join("verify.csv")).unwrap();
    assert!(csv.starts_with("check,value,tolerance,passed,detail\n"));
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(3) == Some("true")), "{csv}");
    assert!(csv.contains("jacobian_fd_crouzeix_raviart"));
    assert!(csv.contains("kinetic_monotone"));
}
