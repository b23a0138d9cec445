use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rothe_core::constitutive::{StressModel, Viscosity};
use rothe_core::elements::{ElementFamily, MixedSpace};
use rothe_core::experiments::{solve, ExperimentConfig, ExperimentKind};
use rothe_core::forms::{Assembler, BodyForce, StepSettings};
use rothe_core::mesh::{build_rectangle_mesh, refine_times};
use rothe_core::nonlinear::{norm2, LuSolver};
use rothe_core::Point2;

// Newton Jacobians of the singular setup at level 3 for every family: the
// ordering must keep pivots on the diagonal almost everywhere and the
// factorisation must solve to the working accuracy.
#[test]
fn step_jacobians_factor_with_diagonal_pivots() {
    let mesh = refine_times(&build_rectangle_mesh(-1.0, -1.0, 1.0, 1.0, 2, 2).unwrap(), 2);
    let model = StressModel::new(2.2, 1e-4, Viscosity::Constant(1.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for fam in ElementFamily::ALL {
        let space = MixedSpace::new(&mesh, fam);
        let asm = Assembler::new(&space);
        let trace = |t: f64, x: Point2| [t * x.y, -t * x.x];
        let data = asm.step_data(&model, &BodyForce(|_: f64, x: Point2| [x.y, 1.0]), &trace, StepSettings::new(4e-3, 3, true)).unwrap();
        let x: Vec<f64> = (0..asm.size()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let prev: Vec<f64> = (0..space.n_u()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let jac = asm.jacobian(&model, &data, &x, &prev).unwrap();
        let b: Vec<f64> = (0..asm.size()).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let lu = LuSolver::new().factor(&jac).unwrap();
        let sol = lu.solve(&b).unwrap();
        let r: Vec<f64> = jac.mul_vec(&sol).unwrap().iter().zip(&b).map(|(a, b)| a - b).collect();
        assert!(norm2(&r) <= 1e-10 * norm2(&b), "{fam:?}: residual {}", norm2(&r) / norm2(&b));
        assert!(lu.off_diagonal_pivots() <= asm.size() / 100, "{fam:?}: {} off-diagonal pivots of {}", lu.off_diagonal_pivots(), asm.size());
        assert!(lu.fill() < 40 * jac.nnz(), "{fam:?}: fill {} for nnz {}", lu.fill(), jac.nnz());
    }
}

#[test]
fn manufactured_stokes_is_reproduced_by_taylor_hood_on_a_fine_mesh() {
    let mut cfg = ExperimentConfig::defaults(ExperimentKind::Manufactured);
    cfg.level = 3;
    let out = solve(&cfg).unwrap();
    let e = out.errors.unwrap();
    assert!(e.l2_time_max() < 2e-3, "{}", e.l2_time_max());
    assert_eq!(out.trajectory.states.len(), 2);
    assert!(out.trajectory.stats.iter().all(|s| s.iterations <= 2));
}
