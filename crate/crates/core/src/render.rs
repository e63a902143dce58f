//! Bird's-eye rendering of label cubes as binary PPM.

use crate::labels::{majority_vote, ClassLabel, NUM_CODES};
use crate::voxel::LabelCube;

/// RGB per class code.
pub const PALETTE: [[u8; 3]; NUM_CODES] = [
    [0, 0, 0],
    [150, 150, 150],
    [220, 50, 47],
    [38, 139, 210],
    [230, 190, 40],
];

/// Collapses the elevation axis by majority vote over non-empty cells.
/// Returns `[range][azimuth]` labels.
pub fn project_bev(cube: &LabelCube) -> Vec<ClassLabel> {
    let [nr, na, ne] = cube.dims();
    let codes = cube.codes();
    (0..nr * na)
        .map(|col| {
            let mut counts = [0u32; NUM_CODES];
            for &c in &codes[col * ne..(col + 1) * ne] {
                if c != 0 {
                    counts[c as usize] += 1;
                }
            }
            majority_vote(&counts)
        })
        .collect()
}

/// Image `n_azimuth` wide and `n_range` tall. Far range is the top row and
/// positive azimuth (left of the sensor) the left column.
pub fn render_bev_ppm(cube: &LabelCube) -> Vec<u8> {
    let [nr, na, _] = cube.dims();
    let bev = project_bev(cube);
    let mut out = format!("P6\n{na} {nr}\n255\n").into_bytes();
    out.reserve(nr * na * 3);
    for row in 0..nr {
        let r = nr - 1 - row;
        for colx in 0..na {
            let a = na - 1 - colx;
            out.extend_from_slice(&PALETTE[bev[r * na + a].code() as usize]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_and_orientation() {
        let mut cube = LabelCube::zeros([4, 3, 2]);
        cube.set([0, 0, 1], ClassLabel::Vehicle);
        let img = render_bev_ppm(&cube);
        let header = b"P6\n3 4\n255\n";
        assert_eq!(&img[..header.len()], header);
        let px = &img[header.len()..];
        assert_eq!(px.len(), 4 * 3 * 3);
        // Nearest range, lowest azimuth: bottom-right pixel.
        assert_eq!(&px[px.len() - 3..], &PALETTE[3]);
        assert!(px[..px.len() - 3].iter().all(|&b| b == 0));
    }

    #[test]
    fn vote_ignores_empty() {
        let mut cube = LabelCube::zeros([1, 1, 5]);
        cube.set([0, 0, 0], ClassLabel::Pedestrian);
        cube.set([0, 0, 1], ClassLabel::Scenario);
        cube.set([0, 0, 2], ClassLabel::Scenario);
        assert_eq!(project_bev(&cube), vec![ClassLabel::Scenario]);
    }
}
