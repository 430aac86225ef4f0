use mdfkit::demo::{run_demo, DemoMode, DemoScene};
use mdfkit::field::{sample_grid, GridSpec, SampledMdfGrid};
use mdfkit::meshing::{load_obj, save_obj};
use mdfkit::metrics::{
    brute_force_distance, evaluate, mesh_chamfer_seeded, sample_surface, MetricParams,
    DEFAULT_VOXEL_RES,
};
use mdfkit::projection::count_infeasible;
use mdfkit::{
    extract_all, marching_cubes, AnalyticScene, Primitive, SceneObject, TriangleMesh, Vec3,
};

fn coarse_sphere() -> TriangleMesh {
    let scene = AnalyticScene::new(vec![SceneObject::new(
        "s",
        vec![Primitive::sphere([0.0; 3], 0.7)],
    )])
    .unwrap();
    let spec = GridSpec::new([12; 3], [-1.0; 3], [1.0; 3]).unwrap();
    marching_cubes(&sample_grid(&scene, &spec).unwrap(), 0, 0.0).unwrap()
}

#[test]
fn translated_sphere_chamfer_matches_brute_force() {
    let m1 = coarse_sphere();
    let t = 0.02;
    let m2 = m1.translated(Vec3::new(t, 0.0, 0.0));
    let n = 3000;
    let got = mesh_chamfer_seeded(&m1, &m2, n, (5, 6)).unwrap();

    let mean_sq = |from: &TriangleMesh, to: &TriangleMesh, seed| {
        let s = sample_surface(from, &from.vertex_normals(), n, seed).unwrap();
        s.points
            .iter()
            .map(|&p| brute_force_distance(to, p).powi(2))
            .sum::<f64>()
            / n as f64
    };
    let want = mean_sq(&m1, &m2, 5) + mean_sq(&m2, &m1, 6);
    assert!(
        (got - want).abs() <= 1e-12 * want.max(1e-12),
        "{got} vs {want}"
    );
    assert!(got <= 2.0 * t * t, "{got}");
    assert!(got > 0.0);
}

#[test]
fn demo_meshes_are_closed_and_projected_grids_feasible() {
    let params = MetricParams {
        n_samples: 2000,
        voxel_res: 64,
        ..MetricParams::default()
    };
    for scene in DemoScene::ALL {
        for mode in [DemoMode::Vanilla, DemoMode::ShiftAll, DemoMode::Qp] {
            let run = run_demo(scene, mode, 0.0, &params, false).unwrap();
            let r = &run.report;
            assert!(r.closed.iter().all(|&c| c), "{scene}/{mode}");
            assert_eq!(r.num_objects, scene.scene().num_objects());
            if mode == DemoMode::Vanilla {
                assert!(r.infeasible_before > 0, "{scene} should overlap");
                assert_eq!(r.modified_points, 0);
            } else {
                assert_eq!(r.infeasible_after, 0, "{scene}/{mode}");
                assert_eq!(r.penalty_after, 0.0);
                assert!(r.penalty_before > 0.0);
                assert!(r.modified_points >= r.infeasible_before);
            }
        }
    }
}

#[test]
fn qp_with_margin_leaves_every_lattice_vector_above_it() {
    let params = MetricParams {
        n_samples: 1000,
        voxel_res: 32,
        ..MetricParams::default()
    };
    let run = run_demo(DemoScene::Chain, DemoMode::Qp, 1e-4, &params, false).unwrap();
    assert_eq!(count_infeasible(&run.grid, 1e-4), 0);
}

#[test]
fn grid_file_round_trip_keeps_feasibility() {
    let params = MetricParams {
        n_samples: 1000,
        voxel_res: 32,
        ..MetricParams::default()
    };
    let run = run_demo(
        DemoScene::TwoSpheres,
        DemoMode::ShiftAll,
        0.0,
        &params,
        false,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.mdfg");
    run.grid.save(&path).unwrap();
    let back = SampledMdfGrid::load(&path).unwrap();
    assert_eq!(back.spec().dims, [64, 64, 64]);
    assert_eq!(back.channels(), 2);
    assert_eq!(count_infeasible(&back, 0.0), 0);
    for (a, b) in back.data().iter().zip(run.grid.data()) {
        assert!(a >= b && a - b <= 1e-6 * b.abs().max(1.0));
    }
}

#[test]
fn obj_round_trip_preserves_counts() {
    let scene = DemoScene::ThreeLobes;
    let grid = sample_grid(&scene.scene(), &scene.grid_spec()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for m in extract_all(&grid) {
        let path = dir.path().join(format!("obj{}.obj", m.object_index));
        save_obj(&m, &path).unwrap();
        let back = load_obj(&path, m.object_index).unwrap();
        assert_eq!(back.vertices.len(), m.vertices.len());
        assert_eq!(back.triangles, m.triangles);
        assert_eq!(back.vertices, m.vertices);
    }
}

#[test]
fn identical_prediction_scores_perfectly() {
    let m = vec![coarse_sphere()];
    let params = MetricParams {
        n_samples: 2000,
        voxel_res: DEFAULT_VOXEL_RES / 4,
        ..MetricParams::default()
    };
    let rep = evaluate(&m, Some(&m), &params, None).unwrap();
    let s = rep.summary.unwrap();
    assert!(s.mcd <= 1e-12);
    assert_eq!((s.f1, s.iou, s.iv_abs), (1.0, 1.0, 0.0));
    assert!((s.mnc - 1.0).abs() <= 1e-6);
}

#[test]
fn vanilla_iv_exceeds_projected_by_four_orders() {
    let params = MetricParams {
        n_samples: 1000,
        ..MetricParams::default()
    };
    let v = run_demo(
        DemoScene::TwoSpheres,
        DemoMode::Vanilla,
        0.0,
        &params,
        false,
    )
    .unwrap();
    let p = run_demo(
        DemoScene::TwoSpheres,
        DemoMode::ShiftAll,
        0.0,
        &params,
        false,
    )
    .unwrap();
    assert!(p.report.eval.iv_abs * 1e4 < v.report.eval.iv_abs);
    // lens of two r = 0.6 spheres with centers 0.8 apart
    let (r, d) = (0.6f64, 0.8f64);
    let lens = std::f64::consts::PI * (4.0 * r + d) * (2.0 * r - d).powi(2) / 12.0;
    assert!(
        (v.report.eval.iv_abs - lens).abs() / lens < 0.03,
        "{} vs {lens}",
        v.report.eval.iv_abs
    );
}
