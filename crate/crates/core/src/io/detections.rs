use std::fmt::Write as _;
use std::path::Path;

use crate::geometry::{OrientedBox, Point3};
use crate::labelling::Detection;
use crate::labels::ClassLabel;

use super::{read_text, write_file, FormatError, Result};

const FIELDS: &str = "class score cx cy cz dx dy dz heading";

/// Parses one detection per line. Blank lines and `#` comments are skipped.
/// `class` is a label code (2 pedestrian, 3 vehicle, 4 bicycle).
pub fn parse_detections(text: &str) -> Result<Vec<Detection>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| FormatError::Parse { line: line_no, msg };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 9 {
            return Err(err(format!("expected 9 fields ({FIELDS}), found {}", fields.len())));
        }
        let code: u8 = fields[0]
            .parse()
            .map_err(|_| err(format!("class {:?} is not a label code", fields[0])))?;
        let class = ClassLabel::from_code(code)
            .filter(|c| c.is_target())
            .ok_or_else(|| err(format!("class {code} is not 2, 3 or 4")))?;
        let mut v = [0.0f64; 8];
        for (k, slot) in v.iter_mut().enumerate() {
            let s = fields[k + 1];
            *slot = s
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| err(format!("field {} ({s:?}) is not a finite number", k + 2)))?;
        }
        let [score, cx, cy, cz, dx, dy, dz, heading] = v;
        let bbox = OrientedBox::new(Point3::new(cx, cy, cz), [dx, dy, dz], heading)
            .map_err(|e| err(e.to_string()))?;
        out.push(Detection::new(bbox, class, score).map_err(|e| err(e.to_string()))?);
    }
    Ok(out)
}

pub fn format_detections(detections: &[Detection]) -> String {
    let mut s = format!("# {FIELDS}\n");
    for d in detections {
        let c = d.bbox.center();
        let [dx, dy, dz] = d.bbox.size();
        writeln!(
            s,
            "{} {} {} {} {} {} {} {} {}",
            d.class.code(),
            d.score,
            c.x,
            c.y,
            c.z,
            dx,
            dy,
            dz,
            d.bbox.heading()
        )
        .expect("write to String");
    }
    s
}

pub fn read_detections(path: impl AsRef<Path>) -> Result<Vec<Detection>> {
    parse_detections(&read_text(path.as_ref())?)
}

pub fn write_detections(path: impl AsRef<Path>, detections: &[Detection]) -> Result<()> {
    write_file(path.as_ref(), format_detections(detections).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_comments() {
        let text = "# header\n\n3 0.9 10 0 -1 4.5 1.8 1.5 0.1  # car\n2 0.4 5 1 -1 0.5 0.5 1.7 0\n";
        let d = parse_detections(text).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].class, ClassLabel::Vehicle);
        assert_eq!(d[1].score, 0.4);
        assert_eq!(d[0].bbox.size(), [4.5, 1.8, 1.5]);
    }

    #[test]
    fn errors_name_the_line() {
        let e = parse_detections("3 0.9 1 2 3\n").unwrap_err();
        assert!(matches!(e, FormatError::Parse { line: 1, .. }), "{e}");
        let e = parse_detections("# c\n3 0.9 1 2 3 1 1 1 x\n").unwrap_err();
        assert!(e.to_string().starts_with("line 2:"), "{e}");
        let e = parse_detections("1 0.9 1 2 3 1 1 1 0\n").unwrap_err();
        assert!(e.to_string().contains("not 2, 3 or 4"), "{e}");
        assert!(parse_detections("3 1.5 1 2 3 1 1 1 0\n").is_err());
        assert!(parse_detections("3 0.5 1 2 3 0 1 1 0\n").is_err());
        assert!(parse_detections("3 0.5 1 2 NaN 1 1 1 0\n").is_err());
    }

    #[test]
    fn round_trip_is_exact() {
        let b = OrientedBox::new(Point3::new(0.1, -2.0 / 3.0, 1e-7), [1.0 / 3.0, 2.0, 0.7], -0.3).unwrap();
        let d = vec![Detection::new(b, ClassLabel::Bicycle, 0.123456789).unwrap()];
        assert_eq!(parse_detections(&format_detections(&d)).unwrap(), d);
    }
}
