use std::fmt::Write as _;
use std::path::Path;

use crate::labelling::{MaskTarget, SemanticMask};
use crate::labels::ClassLabel;

use super::{read_file, read_text, write_file, FormatError, Result};

/// Binary PGM with maxval 255.
pub fn encode_pgm(width: u32, height: u32, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), width as usize * height as usize);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Returns `(width, height, pixels)`.
pub fn decode_pgm(bytes: &[u8]) -> Result<(u32, u32, Vec<u8>)> {
    let mut pos = 0usize;
    let mut header = Vec::with_capacity(4);
    while header.len() < 4 {
        // Whitespace and comments between header tokens.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(FormatError::Truncated("PGM header".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| !b.is_ascii_whitespace()) {
            pos += 1;
        }
        header.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        if header.len() == 1 && header[0] != "P5" {
            return if header[0] == "P2" {
                Err(FormatError::Unsupported("ASCII PGM (P2); convert to binary P5".into()))
            } else {
                Err(FormatError::BadMagic {
                    expected: "P5".into(),
                    found: header[0].clone(),
                })
            };
        }
    }
    let num = |i: usize, what: &str| -> Result<u32> {
        header[i]
            .parse()
            .map_err(|_| FormatError::Document(format!("PGM {what} {:?}", header[i])))
    };
    let (width, height, maxval) = (num(1, "width")?, num(2, "height")?, num(3, "maxval")?);
    if maxval != 255 {
        return Err(FormatError::Unsupported(format!("PGM maxval {maxval}, expected 255")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if bytes.get(pos).is_none_or(|b| !b.is_ascii_whitespace()) {
        return Err(FormatError::Truncated("PGM header".into()));
    }
    let raster = &bytes[pos + 1..];
    let n = width as usize * height as usize;
    if raster.len() != n {
        return Err(FormatError::Integrity(format!(
            "{width}x{height} PGM needs {n} raster bytes, found {}",
            raster.len()
        )));
    }
    Ok((width, height, raster.to_vec()))
}

/// One `source_id target` pair per line, target `1`..`4` or `ignore`.
pub fn parse_mapping(text: &str) -> Result<Vec<(u8, MaskTarget)>> {
    let mut out: Vec<(u8, MaskTarget)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| FormatError::Parse { line: i + 1, msg };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [id, target] = fields[..] else {
            return Err(err(format!("expected `source_id target`, found {} fields", fields.len())));
        };
        let id: u8 = id.parse().map_err(|_| err(format!("source id {id:?} is not in 0..=255")))?;
        let target = if target.eq_ignore_ascii_case("ignore") {
            MaskTarget::Ignore
        } else {
            target
                .parse::<u8>()
                .ok()
                .and_then(ClassLabel::from_code)
                .filter(|c| *c != ClassLabel::Empty)
                .map(MaskTarget::Label)
                .ok_or_else(|| err(format!("target {target:?} is not 1..=4 or ignore")))?
        };
        if out.iter().any(|&(seen, _)| seen == id) {
            return Err(FormatError::Mapping(format!("source id {id} mapped twice (line {})", i + 1)));
        }
        out.push((id, target));
    }
    Ok(out)
}

fn format_mapping(mapping: &[(u8, MaskTarget)]) -> String {
    let mut s = String::from("# source_id target\n");
    for &(id, t) in mapping {
        match t {
            MaskTarget::Ignore => writeln!(s, "{id} ignore"),
            MaskTarget::Label(c) => writeln!(s, "{id} {}", c.code()),
            MaskTarget::Unmapped => Ok(()),
        }
        .expect("write to String");
    }
    s
}

pub fn write_mapping(path: impl AsRef<Path>, mapping: &[(u8, MaskTarget)]) -> Result<()> {
    write_file(path.as_ref(), format_mapping(mapping).as_bytes())
}

/// Reads a PGM mask and its mapping. With `expected_dims`, the mask must
/// match the camera image size.
pub fn read_semantic_mask(
    mask_path: impl AsRef<Path>,
    mapping_path: impl AsRef<Path>,
    expected_dims: Option<(u32, u32)>,
) -> Result<SemanticMask> {
    let (w, h, ids) = decode_pgm(&read_file(mask_path.as_ref())?)?;
    if let Some((ew, eh)) = expected_dims {
        if (w, h) != (ew, eh) {
            return Err(FormatError::Dimension(format!("mask is {w}x{h}, camera image is {ew}x{eh}")));
        }
    }
    let mapping = parse_mapping(&read_text(mapping_path.as_ref())?)?;
    SemanticMask::new(w, h, ids, &mapping).map_err(|e| FormatError::Mapping(e.to_string()))
}

pub fn write_semantic_mask(mask_path: impl AsRef<Path>, mapping_path: impl AsRef<Path>, mask: &SemanticMask) -> Result<()> {
    write_file(mask_path.as_ref(), &encode_pgm(mask.width(), mask.height(), mask.ids()))?;
    write_mapping(mapping_path, &mask.mapping())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_with_comments() {
        let mut bytes = b"P5\n# made by hand\n3 2\n# another\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3, 4, 5, 6]);
        assert_eq!(decode_pgm(&bytes).unwrap(), (3, 2, vec![1, 2, 3, 4, 5, 6]));
    }

    #[test]
    fn pgm_rejections() {
        assert!(matches!(decode_pgm(b"P2\n1 1\n255\n0\n"), Err(FormatError::Unsupported(_))));
        assert!(matches!(decode_pgm(b"P5\n1 1\n65535\n\0\0"), Err(FormatError::Unsupported(_))));
        assert!(matches!(decode_pgm(b"P5\n2 2\n255\n\0"), Err(FormatError::Integrity(_))));
        assert!(matches!(decode_pgm(b"P6\n1 1\n255\n\0"), Err(FormatError::BadMagic { .. })));
        assert!(matches!(decode_pgm(b"P5\n1"), Err(FormatError::Truncated(_))));
    }

    #[test]
    fn pgm_round_trip_with_whitespace_valued_pixels() {
        let px = vec![b'\n', b' ', 0, 255];
        assert_eq!(decode_pgm(&encode_pgm(2, 2, &px)).unwrap(), (2, 2, px));
    }

    #[test]
    fn mapping_parse() {
        let m = parse_mapping("# x\n0 ignore\n11 2\n13 3 # car\n").unwrap();
        assert_eq!(
            m,
            vec![
                (0, MaskTarget::Ignore),
                (11, MaskTarget::Label(ClassLabel::Pedestrian)),
                (13, MaskTarget::Label(ClassLabel::Vehicle))
            ]
        );
        assert_eq!(parse_mapping(&format_mapping(&m)).unwrap(), m);
        assert!(matches!(parse_mapping("1 2\n1 3\n"), Err(FormatError::Mapping(_))));
        assert!(matches!(parse_mapping("1 0\n"), Err(FormatError::Parse { line: 1, .. })));
        assert!(matches!(parse_mapping("300 1\n"), Err(FormatError::Parse { .. })));
        assert!(matches!(parse_mapping("1\n"), Err(FormatError::Parse { .. })));
    }
}
