use radlabel::eval::confusion_and_prf;
use radlabel::labelling::{run_labelling_pipeline, FrameInputs, PipelineConfig};
use radlabel::synth::{generate_scene, SceneSpec};
use radlabel::voxel::{voxelize_labels, GridSpec};

#[test]
fn pipeline_matches_generator_truth() {
    for seed in 0..20 {
        let frame = generate_scene(&SceneSpec::random(seed)).unwrap();
        let inputs = FrameInputs {
            points: frame.points.clone(),
            detections: frame.detections.clone(),
            camera: Some((frame.calibration.camera, frame.mask.clone().unwrap())),
            external_ground: None,
        };
        let cfg = PipelineConfig {
            lidar_to_radar: frame.calibration.lidar_to_radar,
            ..PipelineConfig::default()
        };
        let out = run_labelling_pipeline(&inputs, &cfg).unwrap();
        let pred = out.labels_on_input(frame.points.len());
        let diff = pred.iter().zip(&frame.gt_point_labels).filter(|(a, b)| a != b).count();
        let report = confusion_and_prf(&pred, &frame.gt_point_labels).unwrap();
        assert_eq!(diff, 0, "seed {seed}: {diff} mismatches, counts {:?}, {:?}", out.counts, report.counts);
        let cube = voxelize_labels(&out.cloud.points, &out.cloud.labels, &GridSpec::default()).cube;
        assert_eq!(cube, frame.gt_cube, "seed {seed}");
    }
}

#[test]
fn one_vehicle_cube_matches_rasterized_surface() {
    use radlabel::labelling::FovSpec;
    use radlabel::synth::ObjectSpec;
    use radlabel::ClassLabel;

    let spec = SceneSpec {
        seed: 3,
        objects: vec![ObjectSpec {
            class: ClassLabel::Vehicle,
            center: [10.0, 0.5, -0.75],
            size: [4.5, 1.8, 1.5],
            heading: 0.4,
            density: 150.0,
        }],
        ..SceneSpec::default()
    };
    let frame = generate_scene(&spec).unwrap();
    let grid = GridSpec::default();
    let fov = FovSpec::default();
    let t = frame.calibration.lidar_to_radar;
    let surface: Vec<_> = frame
        .points
        .iter()
        .zip(&frame.true_labels)
        .filter(|(_, &l)| l == ClassLabel::Vehicle)
        .map(|(&p, _)| t.apply(p))
        .filter(|&p| fov.contains(p))
        .collect();
    assert!(surface.len() > 500);
    let (oracle_cube, _) = radlabel_oracles::voxel_tally(&surface, &vec![ClassLabel::Vehicle; surface.len()], &grid);
    let vehicle_cells = |c: &radlabel::LabelCube| {
        c.iter_labels()
            .enumerate()
            .filter(|(_, l)| *l == ClassLabel::Vehicle)
            .map(|(i, _)| i)
            .collect::<Vec<_>>()
    };
    assert_eq!(vehicle_cells(&frame.gt_cube), vehicle_cells(&oracle_cube));
    assert_eq!(frame.gt_cube.count(ClassLabel::Vehicle), oracle_cube.count(ClassLabel::Vehicle));
    assert_eq!(frame.gt_cube.count(ClassLabel::Pedestrian) + frame.gt_cube.count(ClassLabel::Bicycle), 0);
}

#[test]
fn same_seed_same_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let spec = SceneSpec::random(4);
    let fa = radlabel::synth::write_frame(&generate_scene(&spec).unwrap(), a.path()).unwrap();
    let fb = radlabel::synth::write_frame(&generate_scene(&spec).unwrap(), b.path()).unwrap();
    for entry in std::fs::read_dir(a.path()).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(std::fs::read(a.path().join(&name)).unwrap(), std::fs::read(b.path().join(&name)).unwrap(), "{name:?}");
    }
    assert_eq!(fa.file_name(), fb.file_name());
}
