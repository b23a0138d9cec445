use std::fs;
use std::path::Path;

use rothe::config::{self, RunConfig};
use rothe::core::elements::ElementFamily;
use rothe::core::experiments::{ExperimentConfig, ExperimentKind, SingularSolution};
use rothe::run::{convergence_sweep, run_experiment};
use rothe::{checkpoint, HarnessError};

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn short_singular() -> RunConfig {
    let mut cfg = RunConfig::defaults(ExperimentKind::Singular);
    cfg.experiment.t_end = 0.02;
    cfg.experiment.steps = 5;
    cfg.snapshots = 2;
    cfg
}

#[test]
fn defaults_carry_the_published_parameters() {
    let v = ExperimentConfig::defaults(ExperimentKind::Vortex);
    assert_eq!((v.p, v.delta, v.tau(), v.steps, v.t_end), (11.0 / 5.0, 1e-2, 1e-2, 100, 1.0));
    assert_eq!(v.domain, [0.0, 0.0, 3.0, 1.0]);
    let s = ExperimentConfig::defaults(ExperimentKind::Singular);
    assert_eq!((s.p, s.delta, s.tau(), s.t_end), (11.0 / 5.0, 1e-4, 4e-3, 0.5));
    assert_eq!(s.domain, [-1.0, -1.0, 1.0, 1.0]);
    assert_eq!(SingularSolution::for_p(s.p).alpha, 6.0 / 5.0 - 2.0 / (11.0 / 5.0));
}

#[test]
fn run_directory_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_singular();
    let summary = run_experiment(&cfg, dir.path()).unwrap();
    let d = dir.path();
    assert_eq!(config::parse(&read(&d.join("config.txt"))).unwrap(), cfg);
    assert!(read(&d.join("mesh.txt")).starts_with("triangles 2d\n9\n"));
    assert_eq!(read(&d.join("energy.csv")).lines().count(), 1 + 6);
    assert_eq!(read(&d.join("stability.csv")).lines().count(), 1 + 6);
    assert!(read(&d.join("stability.csv")).lines().skip(1).all(|l| l.ends_with(",true")));
    let last = checkpoint::read(&d.join("checkpoints/level_0005.txt")).unwrap();
    assert_eq!(last.state, summary.outcome.trajectory.states[5]);
    let fields: Vec<_> = fs::read_dir(d.join("fields")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(fields.len(), 4);
    let report = read(&d.join("report.csv"));
    assert!(report.lines().nth(1) == Some("n,h,e_L2,EOC_L2,e_F,EOC_F,EOC_tot"), "{report}");
    assert!(summary.report.unwrap().rows[0].e_l2 > 0.0);
}

#[test]
fn identical_configs_give_identical_csv() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = short_singular();
    run_experiment(&cfg, a.path()).unwrap();
    run_experiment(&cfg, b.path()).unwrap();
    for f in ["energy.csv", "stability.csv", "report.csv", "checkpoints/level_0003.txt", "fields/state_0005.vtk"] {
        assert_eq!(read(&a.path().join(f)), read(&b.path().join(f)), "{f}");
    }
}

#[test]
fn solver_failure_keeps_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = short_singular();
    cfg.experiment.newton.max_iter = 1;
    cfg.experiment.newton.abs_tol = 1e-300;
    cfg.experiment.newton.rel_tol = 1e-300;
    let err = run_experiment(&cfg, dir.path()).err().expect("one Newton step cannot reach 1e-300");
    assert!(matches!(err, HarnessError::Solver(_)), "{err}");
    assert_eq!(err.exit_code(), 2);
    assert_eq!(read(&dir.path().join("energy.csv")).lines().count(), 2);
    assert!(dir.path().join("checkpoints/level_0000.txt").exists());
    assert!(dir.path().join("fields/state_0000.vtk").exists());
}

#[test]
fn manufactured_sweep_converges() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::defaults(ExperimentKind::Manufactured);
    let mut seen = 0;
    let report = convergence_sweep(&cfg, 1, 3, dir.path(), &mut |_| seen += 1).unwrap();
    assert_eq!((report.rows.len(), seen), (3, 3));
    assert!(report.rows[1..].iter().all(|r| r.eoc_l2.unwrap() > 2.7), "{report:?}");
    let csv = read(&dir.path().join("convergence.csv"));
    assert_eq!(csv, report.to_csv());
    assert!(dir.path().join("level_3/energy.csv").exists());
}

#[test]
fn sweep_failure_returns_completed_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::defaults(ExperimentKind::Manufactured);
    cfg.experiment.family = ElementFamily::Mini;
    // no step can reach the tolerance
    cfg.experiment.newton.max_iter = 1;
    cfg.experiment.newton.abs_tol = 1e-300;
    cfg.experiment.newton.rel_tol = 1e-300;
    let fail = convergence_sweep(&cfg, 1, 2, dir.path(), &mut |_| {}).unwrap_err();
    assert_eq!((fail.level, fail.partial.rows.len()), (1, 0));

    let vortex = RunConfig::defaults(ExperimentKind::Vortex);
    let fail = convergence_sweep(&vortex, 1, 2, dir.path(), &mut |_| {}).unwrap_err();
    assert_eq!(fail.error.exit_code(), 3);
}
