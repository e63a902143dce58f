//! Randomized round-trip cycles and hand-made corrupt files for every
//! on-disk format.
//!
//! A cycle encodes a random value, decodes it, encodes again and compares
//! the two byte strings.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;

use radlabel::geometry::RigidTransform;
use radlabel::io::{self, Calibration, Dtype, FormatError, FrameBundle, TensorData, TensorMeta};
use radlabel::labelling::{CameraModel, Detection, MaskTarget};
use radlabel::{ClassLabel, OrientedBox, Point3};

use crate::random_labels;

pub const FORMATS: [&str; 9] = [
    "point cloud",
    "ground mask",
    "detections",
    "tensor f32",
    "tensor u8",
    "tensor i32",
    "calibration",
    "mask + mapping",
    "bundle",
];

fn f32_point<R: Rng>(rng: &mut R) -> Point3 {
    let mut c = || f64::from(rng.random_range(-80.0f32..80.0));
    Point3::new(c(), c(), c())
}

fn random_transform<R: Rng>(rng: &mut R) -> RigidTransform {
    let pi = std::f64::consts::PI;
    RigidTransform::from_rpy(
        rng.random_range(-pi..pi),
        rng.random_range(-pi / 2.0..pi / 2.0),
        rng.random_range(-pi..pi),
        Point3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)),
    )
}

fn random_detection<R: Rng>(rng: &mut R) -> Detection {
    let class = [ClassLabel::Pedestrian, ClassLabel::Vehicle, ClassLabel::Bicycle][rng.random_range(0..3)];
    let size = [rng.random_range(0.1..6.0), rng.random_range(0.1..3.0), rng.random_range(0.1..3.0)];
    let bbox = OrientedBox::new(
        Point3::new(rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0), rng.random_range(-3.0..3.0)),
        size,
        rng.random_range(-10.0..10.0),
    )
    .expect("positive size");
    Detection::new(bbox, class, rng.random_range(0.0..=1.0)).expect("valid detection")
}

fn random_calibration<R: Rng>(rng: &mut R) -> Calibration {
    let width = rng.random_range(16..2000);
    let height = rng.random_range(16..1200);
    let camera = CameraModel::new(
        [
            rng.random_range(50.0..2000.0),
            rng.random_range(50.0..2000.0),
            rng.random_range(0.0..width as f64),
            rng.random_range(0.0..height as f64),
        ],
        width,
        height,
        random_transform(rng),
    )
    .expect("valid camera");
    Calibration {
        camera,
        lidar_to_radar: random_transform(rng),
    }
}

fn random_mapping<R: Rng>(rng: &mut R) -> Vec<(u8, MaskTarget)> {
    let mut ids: Vec<u8> = (0..=255).collect();
    for i in (1..ids.len()).rev() {
        ids.swap(i, rng.random_range(0..=i));
    }
    let n = rng.random_range(0..20);
    ids[..n]
        .iter()
        .map(|&id| {
            let t = match rng.random_range(0..5u8) {
                0 => MaskTarget::Ignore,
                c => MaskTarget::Label(ClassLabel::from_code(c).unwrap()),
            };
            (id, t)
        })
        .collect()
}

/// Bytes of a tensor file plus its sidecar.
fn tensor_bytes(path: &Path) -> Vec<u8> {
    let mut b = fs::read(path).expect("payload");
    b.extend(fs::read(io::sidecar_path(path)).expect("sidecar"));
    b
}

fn tensor_cycle<R: Rng>(rng: &mut R, dir: &Path, dtype: Dtype) -> Result<(), String> {
    let rank = rng.random_range(1..=4);
    let shape: Vec<usize> = (0..rank).map(|_| rng.random_range(0..6)).collect();
    let n: usize = shape.iter().product();
    let data = match dtype {
        Dtype::F32 => TensorData::F32((0..n).map(|_| f32::from_bits(rng.random::<u32>() & 0x7f7f_ffff)).collect()),
        Dtype::U8 => TensorData::U8((0..n).map(|_| rng.random()).collect()),
        Dtype::I32 => TensorData::I32((0..n).map(|_| rng.random()).collect()),
    };
    let names = ["a", "b", "c", "d"];
    let mut meta = TensorMeta::new(&shape, dtype, &names[..rank]);
    if rng.random_bool(0.3) {
        meta.elevation_bins = Some(rng.random_range(1..64));
    }
    let (p1, p2) = (dir.join("t1.bin"), dir.join("t2.bin"));
    io::write_tensor(&p1, &meta, &data).map_err(|e| e.to_string())?;
    let t = io::read_tensor(&p1).map_err(|e| e.to_string())?;
    if t.meta != meta || t.data.to_bytes() != data.to_bytes() {
        return Err("decoded tensor differs".into());
    }
    io::write_tensor(&p2, &t.meta, &t.data).map_err(|e| e.to_string())?;
    same(&tensor_bytes(&p1), &tensor_bytes(&p2))
}

fn same(a: &[u8], b: &[u8]) -> Result<(), String> {
    if a == b {
        Ok(())
    } else {
        let at = a.iter().zip(b).position(|(x, y)| x != y).unwrap_or(a.len().min(b.len()));
        Err(format!("re-encoded bytes differ at offset {at} ({} vs {} bytes)", a.len(), b.len()))
    }
}

/// One randomized cycle of format `FORMATS[which]`. `dir` is scratch space.
pub fn round_trip<R: Rng>(which: usize, rng: &mut R, dir: &Path) -> Result<(), String> {
    let err = |e: FormatError| e.to_string();
    match which {
        0 => {
            let n = rng.random_range(0..200);
            let points: Vec<Point3> = (0..n).map(|_| f32_point(rng)).collect();
            let labels = rng.random_bool(0.5).then(|| random_labels(rng, n));
            let a = io::encode_point_cloud(&points, labels.as_deref());
            let pc = io::decode_point_cloud(&a).map_err(err)?;
            if pc.points != points || pc.labels != labels {
                return Err("decoded cloud differs".into());
            }
            same(&a, &io::encode_point_cloud(&pc.points, pc.labels.as_deref()))
        }
        1 => {
            let mask: Vec<bool> = (0..rng.random_range(0..500)).map(|_| rng.random()).collect();
            let a = io::encode_ground_mask(&mask);
            let back = io::decode_ground_mask(&a).map_err(err)?;
            if back != mask {
                return Err("decoded mask differs".into());
            }
            same(&a, &io::encode_ground_mask(&back))
        }
        2 => {
            let dets: Vec<Detection> = (0..rng.random_range(0..12)).map(|_| random_detection(rng)).collect();
            let a = io::format_detections(&dets);
            let back = io::parse_detections(&a).map_err(err)?;
            if back != dets {
                return Err("decoded detections differ".into());
            }
            same(a.as_bytes(), io::format_detections(&back).as_bytes())
        }
        3 => tensor_cycle(rng, dir, Dtype::F32),
        4 => tensor_cycle(rng, dir, Dtype::U8),
        5 => tensor_cycle(rng, dir, Dtype::I32),
        6 => {
            let c = random_calibration(rng);
            let a = io::format_calibration(&c);
            let back = io::parse_calibration(&a).map_err(err)?;
            if back != c {
                return Err("decoded calibration differs".into());
            }
            same(a.as_bytes(), io::format_calibration(&back).as_bytes())
        }
        7 => {
            let (w, h) = (rng.random_range(1..64), rng.random_range(1..64));
            let ids: Vec<u8> = (0..w * h).map(|_| rng.random()).collect();
            let mapping = random_mapping(rng);
            let mask = radlabel::labelling::SemanticMask::new(w, h, ids, &mapping).map_err(|e| e.to_string())?;
            let (m1, t1, m2, t2) = (dir.join("m1.pgm"), dir.join("m1.txt"), dir.join("m2.pgm"), dir.join("m2.txt"));
            io::write_semantic_mask(&m1, &t1, &mask).map_err(err)?;
            let back = io::read_semantic_mask(&m1, &t1, Some((w, h))).map_err(err)?;
            if back != mask {
                return Err("decoded mask differs".into());
            }
            io::write_semantic_mask(&m2, &t2, &back).map_err(err)?;
            same(&fs::read(&m1).unwrap(), &fs::read(&m2).unwrap())?;
            same(&fs::read(&t1).unwrap(), &fs::read(&t2).unwrap())
        }
        8 => {
            let name = |rng: &mut R, ext: &str| PathBuf::from(format!("f{}/{}.{ext}", rng.random_range(0..1000), rng.random::<u32>()));
            let mut b = FrameBundle {
                frame_id: format!("frame_{:06}", rng.random_range(0..1_000_000)),
                points: name(rng, "pcb"),
                detections: name(rng, "txt"),
                calibration: name(rng, "toml"),
                base_dir: dir.to_path_buf(),
                ..FrameBundle::default()
            };
            if rng.random_bool(0.5) {
                b.mask = Some(name(rng, "pgm"));
                b.mask_mapping = Some(name(rng, "txt"));
            }
            if rng.random_bool(0.5) {
                b.raed_power = Some(name(rng, "f32"));
                b.raed_elevation = Some(name(rng, "i32"));
            }
            if rng.random_bool(0.5) {
                b.ground_mask = Some(name(rng, "gmk"));
            }
            let (p1, p2) = (dir.join("b1.toml"), dir.join("b2.toml"));
            b.write(&p1).map_err(err)?;
            let back = FrameBundle::parse(&fs::read_to_string(&p1).unwrap(), dir).map_err(err)?;
            if back != b {
                return Err("decoded bundle differs".into());
            }
            back.write(&p2).map_err(err)?;
            same(&fs::read(&p1).unwrap(), &fs::read(&p2).unwrap())
        }
        _ => panic!("no format {which}"),
    }
}

/// Error classes a corrupt fixture may be rejected with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    BadMagic,
    Truncated,
    LabelRange,
    Parse,
    Integrity,
    UnknownDtype,
    Calibration,
    MissingKey,
    Dimension,
    Mapping,
    Unsupported,
    Document,
}

pub fn classify(e: &FormatError) -> Option<ErrorClass> {
    Some(match e {
        FormatError::BadMagic { .. } => ErrorClass::BadMagic,
        FormatError::Truncated(_) => ErrorClass::Truncated,
        FormatError::LabelRange(_) => ErrorClass::LabelRange,
        FormatError::Parse { .. } => ErrorClass::Parse,
        FormatError::Integrity(_) => ErrorClass::Integrity,
        FormatError::UnknownDtype(_) => ErrorClass::UnknownDtype,
        FormatError::Calibration(_) => ErrorClass::Calibration,
        FormatError::MissingKey(_) => ErrorClass::MissingKey,
        FormatError::Dimension(_) => ErrorClass::Dimension,
        FormatError::Mapping(_) => ErrorClass::Mapping,
        FormatError::Unsupported(_) => ErrorClass::Unsupported,
        FormatError::Document(_) => ErrorClass::Document,
        FormatError::Io { .. } => return None,
    })
}

pub struct Fixture {
    pub name: &'static str,
    pub expect: ErrorClass,
    /// Outcome of loading the corrupt input; `Ok` means it was accepted.
    pub outcome: Result<(), FormatError>,
}

impl Fixture {
    pub fn check(&self) -> Result<(), String> {
        match &self.outcome {
            Ok(()) => Err(format!("{}: accepted", self.name)),
            Err(e) if classify(e) == Some(self.expect) => Ok(()),
            Err(e) => Err(format!("{}: expected {:?}, got {e}", self.name, self.expect)),
        }
    }
}

fn pcb(count: u32, flags: u8, body: &[u8]) -> Vec<u8> {
    let mut b = b"PCB1".to_vec();
    b.extend(count.to_le_bytes());
    b.push(flags);
    b.extend(body);
    b
}

fn write_tensor_raw(dir: &Path, name: &str, sidecar: &str, payload: &[u8]) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, payload).unwrap();
    fs::write(io::sidecar_path(&p), sidecar).unwrap();
    p
}

const IDENTITY4: &str = "[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]";

fn calib_text(l2c: &str) -> String {
    format!(
        "image_width = 64\nimage_height = 48\nintrinsics = [100.0, 0.0, 32.0, 0.0, 100.0, 24.0, 0.0, 0.0, 1.0]\nlidar_to_camera = {l2c}\nlidar_to_radar = {IDENTITY4}\n"
    )
}

/// Every hand-made corrupt input with the error class it must raise.
/// `dir` is scratch space for file-based fixtures.
pub fn corrupt_fixtures(dir: &Path) -> Vec<Fixture> {
    let point = [1.0f32, 2.0, 3.0].iter().flat_map(|v| v.to_le_bytes()).collect::<Vec<u8>>();
    let unit = |v: Result<Vec<bool>, FormatError>| v.map(drop);
    let pc = |v: Result<io::PointCloud, FormatError>| v.map(drop);
    let mut labeled_bad = point.clone();
    labeled_bad.push(7);
    let mut trailing = point.clone();
    trailing.push(0);

    let cube_dir = dir.join("cube.u8");
    let _ = write_tensor_raw(dir, "cube.u8", r#"{"shape":[1,1,2],"dtype":"u8","order":"row-major"}"#, &[1, 7]);
    let raed_p = write_tensor_raw(dir, "p.f32", r#"{"shape":[1,1,1],"dtype":"f32","order":"row-major"}"#, &1f32.to_le_bytes());
    let raed_e = write_tensor_raw(
        dir,
        "e.i32",
        r#"{"shape":[1,1,1],"dtype":"i32","order":"row-major","elevation_bins":34}"#,
        &35i32.to_le_bytes(),
    );

    let mask_pgm = dir.join("mask.pgm");
    fs::write(&mask_pgm, io::encode_pgm(4, 3, &[0; 12])).unwrap();
    let dup_map = dir.join("dup.txt");
    fs::write(&dup_map, "7 ignore\n7 1\n").unwrap();
    let ok_map = dir.join("ok.txt");
    fs::write(&ok_map, "0 ignore\n").unwrap();

    let reflect = "[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 1.0]";
    let sheared = "[1.0, 0.1, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]";
    let calib = |t: String| io::parse_calibration(&t).map(drop);

    vec![
        Fixture { name: "point cloud with wrong magic", expect: ErrorClass::BadMagic, outcome: pc(io::decode_point_cloud(b"PCB2\x01\x00\x00\x00\x00")) },
        Fixture { name: "point cloud payload cut short", expect: ErrorClass::Truncated, outcome: pc(io::decode_point_cloud(&pcb(2, 0, &point))) },
        Fixture { name: "point cloud header cut short", expect: ErrorClass::Truncated, outcome: pc(io::decode_point_cloud(b"PCB1\x01")) },
        Fixture { name: "point cloud label byte 7", expect: ErrorClass::LabelRange, outcome: pc(io::decode_point_cloud(&pcb(1, 1, &labeled_bad))) },
        Fixture { name: "point cloud trailing bytes", expect: ErrorClass::Integrity, outcome: pc(io::decode_point_cloud(&pcb(1, 0, &trailing))) },
        Fixture { name: "point cloud unknown flag bit", expect: ErrorClass::Integrity, outcome: pc(io::decode_point_cloud(&pcb(1, 4, &point))) },
        Fixture { name: "ground mask with wrong magic", expect: ErrorClass::BadMagic, outcome: unit(io::decode_ground_mask(b"PCB1\x00\x00\x00\x00")) },
        Fixture { name: "ground mask length mismatch", expect: ErrorClass::Integrity, outcome: unit(io::decode_ground_mask(b"GMK1\x03\x00\x00\x00\x01\x00")) },
        Fixture { name: "ground mask flag byte 2", expect: ErrorClass::Integrity, outcome: unit(io::decode_ground_mask(b"GMK1\x01\x00\x00\x00\x02")) },
        Fixture { name: "detection with 8 fields", expect: ErrorClass::Parse, outcome: io::parse_detections("# header\n3 0.9 1 2 3 4 5 6\n").map(drop) },
        Fixture { name: "detection score above 1", expect: ErrorClass::Parse, outcome: io::parse_detections("3 1.5 1 2 3 4 5 6 0\n").map(drop) },
        Fixture { name: "detection of class 1", expect: ErrorClass::Parse, outcome: io::parse_detections("1 0.9 1 2 3 4 5 6 0\n").map(drop) },
        Fixture { name: "detection with zero size", expect: ErrorClass::Parse, outcome: io::parse_detections("2 0.9 1 2 3 0 5 6 0\n").map(drop) },
        Fixture { name: "tensor payload one byte short", expect: ErrorClass::Integrity, outcome: io::decode_tensor(r#"{"shape":[2,2],"dtype":"f32","order":"row-major"}"#, &[0; 15]).map(drop) },
        Fixture { name: "tensor of unknown dtype", expect: ErrorClass::UnknownDtype, outcome: io::decode_tensor(r#"{"shape":[1],"dtype":"f64","order":"row-major"}"#, &[0; 8]).map(drop) },
        Fixture { name: "tensor sidecar without shape", expect: ErrorClass::MissingKey, outcome: io::decode_tensor(r#"{"dtype":"u8","order":"row-major"}"#, &[0]).map(drop) },
        Fixture { name: "tensor in column-major order", expect: ErrorClass::Unsupported, outcome: io::decode_tensor(r#"{"shape":[1],"dtype":"u8","order":"column-major"}"#, &[0]).map(drop) },
        Fixture { name: "tensor sidecar not JSON", expect: ErrorClass::Document, outcome: io::decode_tensor("shape = [1]", &[0]).map(drop) },
        Fixture { name: "label cube code 7", expect: ErrorClass::LabelRange, outcome: io::read_label_cube(&cube_dir).map(drop) },
        Fixture { name: "RAED elevation index 35", expect: ErrorClass::Integrity, outcome: io::read_raed(&raed_p, &raed_e).map(drop) },
        Fixture { name: "calibration missing a key", expect: ErrorClass::MissingKey, outcome: calib(calib_text(IDENTITY4).replace("image_height = 48\n", "")) },
        Fixture { name: "calibration with sheared rotation", expect: ErrorClass::Calibration, outcome: calib(calib_text(sheared)) },
        Fixture { name: "calibration with reflection", expect: ErrorClass::Calibration, outcome: calib(calib_text(reflect)) },
        Fixture { name: "calibration with skew", expect: ErrorClass::Calibration, outcome: calib(calib_text(IDENTITY4).replace("100.0, 0.0, 32.0", "100.0, 0.5, 32.0")) },
        Fixture { name: "ASCII PGM mask", expect: ErrorClass::Unsupported, outcome: io::decode_pgm(b"P2\n1 1\n255\n0\n").map(drop) },
        Fixture { name: "mask with wrong magic", expect: ErrorClass::BadMagic, outcome: io::decode_pgm(b"P6\n1 1\n255\n\0\0\0").map(drop) },
        Fixture { name: "16-bit PGM mask", expect: ErrorClass::Unsupported, outcome: io::decode_pgm(b"P5\n1 1\n65535\n\0\0").map(drop) },
        Fixture { name: "mask raster cut short", expect: ErrorClass::Integrity, outcome: io::decode_pgm(b"P5\n2 2\n255\n\0\0\0").map(drop) },
        Fixture { name: "mapping with duplicate id", expect: ErrorClass::Mapping, outcome: io::read_semantic_mask(&mask_pgm, &dup_map, None).map(drop) },
        Fixture { name: "mapping with target 0", expect: ErrorClass::Parse, outcome: io::parse_mapping("5 0\n").map(drop) },
        Fixture { name: "mask size differs from camera", expect: ErrorClass::Dimension, outcome: io::read_semantic_mask(&mask_pgm, &ok_map, Some((5, 3))).map(drop) },
        Fixture { name: "bundle with unknown key", expect: ErrorClass::Document, outcome: FrameBundle::parse("frame_id = \"a\"\npoints = \"p\"\ndetections = \"d\"\ncalibration = \"c\"\nlidar = \"x\"\n", dir).map(drop) },
        Fixture { name: "bundle mask without mapping", expect: ErrorClass::MissingKey, outcome: FrameBundle::parse("frame_id = \"a\"\npoints = \"p\"\ndetections = \"d\"\ncalibration = \"c\"\nmask = \"m\"\n", dir).map(drop) },
    ]
}

/// Runs `cycles` round trips of every format with a fresh scratch
/// directory. Returns per-format failure counts and the first message.
pub fn round_trip_all<R: Rng>(rng: &mut R, cycles: usize) -> Vec<(&'static str, usize, Option<String>)> {
    let dir = tempfile::tempdir().expect("scratch dir");
    FORMATS
        .iter()
        .enumerate()
        .map(|(which, name)| {
            let mut failures = 0;
            let mut first = None;
            for _ in 0..cycles {
                if let Err(e) = round_trip(which, rng, dir.path()) {
                    failures += 1;
                    first.get_or_insert(e);
                }
            }
            (*name, failures, first)
        })
        .collect()
}
