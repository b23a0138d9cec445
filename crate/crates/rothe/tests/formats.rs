use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rothe::core::elements::{ElementFamily, MixedSpace};
use rothe::core::forms::DiscreteState;
use rothe::core::mesh::{build_rectangle_mesh, refine_times};
use rothe::{checkpoint, vtk};

fn random_state(space: &MixedSpace, seed: u64) -> DiscreteState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = DiscreteState::zeros(space, 0.25);
    s.u.iter_mut().chain(s.pr.iter_mut()).for_each(|v| *v = rng.gen_range(-3.0..3.0));
    s.multiplier = rng.gen_range(-1.0..1.0);
    s
}

#[test]
fn vtk_round_trip_reproduces_nodal_values() {
    let mesh = refine_times(&build_rectangle_mesh(0.0, 0.0, 3.0, 1.0, 3, 1).unwrap(), 1);
    for fam in ElementFamily::ALL {
        let space = MixedSpace::new(&mesh, fam);
        let state = random_state(&space, 7);
        let grid = vtk::parse(&vtk::to_string(&space, &state, "round trip")).unwrap();

        let n_points = (0..space.node_points().len()).filter(|&n| !space.is_bubble_node(n)).count();
        assert_eq!(grid.points.len(), n_points, "{fam:?}");
        assert_eq!(grid.cells.len(), mesh.num_cells());
        let vel = &grid.point_vectors["velocity"];
        for (n, (pt, v)) in grid.points.iter().zip(vel).enumerate() {
            let want = space.node_points()[n];
            assert!((pt[0] - want.x).abs() <= 1e-12 && (pt[1] - want.y).abs() <= 1e-12);
            assert!((v[0] - state.u[2 * n]).abs() <= 1e-12 && (v[1] - state.u[2 * n + 1]).abs() <= 1e-12);
        }

        if fam.discontinuous_pressure() {
            let (comps, vals) = &grid.cell_scalars["pressure_vertices"];
            assert_eq!(*comps, 3);
            for c in 0..mesh.num_cells() {
                for (i, &d) in space.cell_pressure_dofs(c).iter().enumerate() {
                    assert!((vals[3 * c + i] - state.pr[d]).abs() <= 1e-12);
                }
            }
            assert!(!grid.point_scalars.contains_key("pressure"));
        } else {
            let (_, vals) = &grid.point_scalars["pressure"];
            for (got, want) in vals.iter().zip(&state.pr).take(mesh.num_vertices()) {
                assert!((got - want).abs() <= 1e-12);
            }
        }
        let (_, centroid) = &grid.cell_scalars["pressure_centroid"];
        assert_eq!(centroid.len(), mesh.num_cells());
    }
}

#[test]
fn vtk_output_is_stable() {
    let mesh = build_rectangle_mesh(0.0, 0.0, 1.0, 1.0, 2, 2).unwrap();
    let space = MixedSpace::new(&mesh, ElementFamily::TaylorHood);
    let state = random_state(&space, 3);
    assert_eq!(vtk::to_string(&space, &state, "a"), vtk::to_string(&space, &state.clone(), "a"));
}

#[test]
fn checkpoint_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = build_rectangle_mesh(0.0, 0.0, 1.0, 1.0, 2, 2).unwrap();
    let space = MixedSpace::new(&mesh, ElementFamily::CrouzeixRaviartConforming);
    let state = random_state(&space, 11);
    let path = dir.path().join("level_0003.txt");
    checkpoint::write(&path, 3, &state).unwrap();
    let back = checkpoint::read(&path).unwrap();
    assert_eq!(back.k, 3);
    assert_eq!(back.state, state);
    assert!(checkpoint::read(&dir.path().join("missing.txt")).is_err());
}
