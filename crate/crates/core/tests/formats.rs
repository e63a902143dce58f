use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use radlabel::io::{self, FormatError};
use radlabel::{ClassLabel, Point3};
use radlabel_oracles::formats::{corrupt_fixtures, round_trip, round_trip_all, FORMATS};

#[test]
fn thousand_round_trips_per_format() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (name, failures, first) in round_trip_all(&mut rng, 1000) {
        assert_eq!(failures, 0, "{name}: {failures} failures, first: {first:?}");
    }
}

#[test]
fn corrupt_files_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let fixtures = corrupt_fixtures(dir.path());
    let failures: Vec<String> = fixtures.iter().filter_map(|f| f.check().err()).collect();
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn parse_errors_name_the_line() {
    let err = io::parse_detections("# c s x y z l w h r\n\n3 0.9 1 2 3 4 5 6\n").unwrap_err();
    assert!(matches!(err, FormatError::Parse { line: 3, .. }), "{err}");
    assert!(err.to_string().starts_with("line 3:"));
}

#[test]
fn label_byte_seven_is_a_range_error() {
    let mut bytes = io::encode_point_cloud(&[Point3::new(1.0, 2.0, 3.0)], Some(&[ClassLabel::Vehicle]));
    *bytes.last_mut().unwrap() = 7;
    assert!(matches!(io::decode_point_cloud(&bytes), Err(FormatError::LabelRange(7))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn any_format_round_trips(seed in any::<u64>(), which in 0..FORMATS.len()) {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        prop_assert_eq!(round_trip(which, &mut rng, dir.path()), Ok(()));
    }

    #[test]
    fn point_decoder_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
        let _ = io::decode_point_cloud(&bytes);
        let _ = io::decode_ground_mask(&bytes);
        let _ = io::decode_pgm(&bytes);
    }

    #[test]
    fn truncation_is_always_rejected(n in 1usize..40, cut in 1usize..13, labeled in any::<bool>()) {
        let pts: Vec<Point3> = (0..n).map(|i| Point3::new(i as f64, 0.5, -1.0)).collect();
        let labels = vec![ClassLabel::Scenario; n];
        let bytes = io::encode_point_cloud(&pts, labeled.then_some(&labels[..]));
        let cut = cut.min(bytes.len() - 9);
        prop_assert!(io::decode_point_cloud(&bytes[..bytes.len() - cut]).is_err());
    }
}
