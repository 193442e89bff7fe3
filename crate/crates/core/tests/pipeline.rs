//! End-to-end pipeline integration: simulate → build map → relocalize
//! → evaluate, plus dataset round trips through disk.

use nalgebra::Vector3;

use ellimap_core::pipeline::{
    build_map, evaluate, read_dataset, relocalize, write_dataset, Config, MapFile,
};
use ellimap_core::sim::{
    generate_trajectory, render_frame, SceneObject, SceneSpec, TrajectorySpec,
};
use ellimap_core::{CameraIntrinsics, Frame};

fn camera() -> CameraIntrinsics {
    CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap()
}

fn scene_objects() -> Vec<SceneObject> {
    vec![
        SceneObject { class_id: 1, center: [1.2, 0.3, 0.25], yaw: 0.3, size: (0.5, 0.3, 0.5) },
        SceneObject { class_id: 2, center: [-1.1, 0.5, 0.2], yaw: -0.6, size: (0.6, 0.35, 0.4) },
        SceneObject { class_id: 3, center: [0.2, 1.3, 0.3], yaw: 1.0, size: (0.45, 0.25, 0.6) },
        SceneObject { class_id: 4, center: [-0.4, -1.2, 0.15], yaw: 0.1, size: (0.7, 0.4, 0.3) },
        SceneObject { class_id: 1, center: [0.9, -0.9, 0.35], yaw: -1.2, size: (0.4, 0.25, 0.7) },
        SceneObject { class_id: 2, center: [-1.4, -0.5, 0.25], yaw: 0.8, size: (0.55, 0.3, 0.5) },
        SceneObject { class_id: 3, center: [0.1, -0.3, 0.2], yaw: -0.2, size: (0.5, 0.3, 0.4) },
        SceneObject { class_id: 4, center: [1.6, 1.2, 0.3], yaw: 0.5, size: (0.45, 0.35, 0.6) },
    ]
}

fn orbit_scene(steps: usize, seed: u64) -> SceneSpec {
    let poses = generate_trajectory(&TrajectorySpec::Orbit {
        center: Vector3::new(0.0, 0.0, 0.3),
        radius: 4.0,
        height: 1.8,
        steps,
    })
    .unwrap();
    let scene = SceneSpec {
        objects: scene_objects(),
        camera: camera(),
        trajectory: poses
            .into_iter()
            .enumerate()
            .map(|(i, p)| (i as f64 * 0.1, p))
            .collect(),
        noise: Default::default(),
        seed,
    };
    scene.validate().unwrap();
    scene
}

fn render_all(scene: &SceneSpec) -> Vec<Frame> {
    (0..scene.trajectory.len())
        .map(|i| render_frame(scene, i).unwrap())
        .collect()
}

fn build_test_map(frames: &[Frame], config: &Config) -> MapFile {
    build_map(frames, &camera(), config).unwrap()
}

#[test]
fn mapping_recovers_every_object() {
    let scene = orbit_scene(24, 0);
    let frames = render_all(&scene);
    let config = Config::default();
    let map = build_test_map(&frames, &config);
    assert_eq!(map.objects.len(), scene.objects.len(), "one map object per scene object");

    // Every scene object has exactly one map object of its class
    // nearby, with a comparable footprint.
    for obj in &scene.objects {
        let center = Vector3::from(obj.center);
        let matches: Vec<_> = map
            .objects
            .iter()
            .filter(|m| {
                m.class_id == obj.class_id
                    && (Vector3::from(m.center) - center).norm() < 0.15
            })
            .collect();
        assert_eq!(matches.len(), 1, "object at {center:?} matched {}", matches.len());
        let m = matches[0];
        let est: Vector3<f64> = Vector3::from(m.semi_axes);
        let truth = Vector3::new(obj.size.0 / 2.0, obj.size.1 / 2.0, obj.size.2 / 2.0);
        // Compare sorted magnitudes: the yaw convention may swap x/y.
        let mut a = [est.x, est.y, est.z];
        let mut b = [truth.x, truth.y, truth.z];
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (ai, bi) in a.iter().zip(b.iter()) {
            assert!(
                (ai - bi).abs() < 0.12,
                "semi-axis mismatch at {center:?}: est {a:?} truth {b:?}"
            );
        }
    }
}

#[test]
fn relocalization_on_offset_views_is_accurate() {
    let scene = orbit_scene(24, 0);
    let frames = render_all(&scene);
    let config = Config::default();
    let map = build_test_map(&frames, &config);

    // Query views: same orbit rotated by 20 degrees about the scene
    // center, so no query pose coincides with a mapping pose.
    let query_poses = generate_trajectory(&TrajectorySpec::OffsetReplay {
        base: scene.trajectory.iter().map(|&(_, p)| p).collect(),
        center: Vector3::new(0.0, 0.0, 0.3),
        offset_angle: 20f64.to_radians(),
    })
    .unwrap();
    let query_scene = SceneSpec {
        trajectory: query_poses
            .iter()
            .enumerate()
            .map(|(i, &p)| (100.0 + i as f64 * 0.1, p))
            .collect(),
        ..orbit_scene(24, 1)
    };
    let query_frames = render_all(&query_scene);

    let records = relocalize(&query_frames, &map, &camera(), &config).unwrap();
    let gt: Vec<(f64, _)> = query_scene.trajectory.clone();
    let report = evaluate(&records, &gt).unwrap();
    assert!(
        report.valid_ratio_percent >= 90.0,
        "valid ratio {:.1}%",
        report.valid_ratio_percent
    );
    assert!(
        report.median_position_error_cm.unwrap() < 5.0,
        "median position error {:.2} cm",
        report.median_position_error_cm.unwrap()
    );
    assert!(
        report.median_rotation_error_deg.unwrap() < 2.0,
        "median rotation error {:.3} deg",
        report.median_rotation_error_deg.unwrap()
    );
}

#[test]
fn pipeline_round_trips_through_disk() {
    let scene = orbit_scene(8, 0);
    let frames = render_all(&scene);
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), &camera(), &frames).unwrap();
    let loaded = read_dataset(dir.path()).unwrap();
    assert_eq!(loaded.frames.len(), frames.len());
    for (a, b) in frames.iter().zip(loaded.frames.iter()) {
        assert_eq!(a.detections.len(), b.detections.len());
        let pa = a.pose.unwrap();
        let pb = b.pose.unwrap();
        assert!(pa.rotation_angle_to(&pb) < 1e-6);
        assert!((pa.camera_center() - pb.camera_center()).norm() < 1e-7);
    }

    let map = build_test_map(&loaded.frames, &Config::default());
    let map_path = dir.path().join("map.json");
    map.save(&map_path).unwrap();
    let reloaded = MapFile::load(&map_path).unwrap();
    assert_eq!(map, reloaded);
}
