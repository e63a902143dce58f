//! Range-azimuth-elevation-Doppler tensors and their reduction to a spatial
//! range × azimuth × elevation power cube.

use thiserror::Error;

use crate::par;

pub const N_DOPPLER: usize = 128;
pub const N_AZIMUTH: usize = 240;
pub const N_RANGE: usize = 500;
pub const N_ELEVATION: usize = 34;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RadarError {
    #[error("corrupt tensor: {0}")]
    Corrupt(String),
}

/// Power channel plus the per-bin elevation index of the strongest return.
///
/// Both channels are laid out `[doppler][azimuth][range]`, row-major.
/// Elevation indices are one-based (`1..=n_elevation`) as in the recorded
/// data.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarTensorRaed {
    n_doppler: usize,
    n_azimuth: usize,
    n_range: usize,
    n_elevation: usize,
    power: Vec<f32>,
    elevation: Vec<i32>,
}

impl RadarTensorRaed {
    /// `dims = [n_doppler, n_azimuth, n_range]`.
    pub fn new(
        dims: [usize; 3],
        n_elevation: usize,
        power: Vec<f32>,
        elevation: Vec<i32>,
    ) -> Result<Self, RadarError> {
        let len: usize = dims.iter().product();
        if power.len() != len || elevation.len() != len {
            return Err(RadarError::Corrupt(format!(
                "dims {dims:?} need {len} elements, got power {} / elevation {}",
                power.len(),
                elevation.len()
            )));
        }
        if n_elevation == 0 {
            return Err(RadarError::Corrupt("zero elevation bins".into()));
        }
        if let Some((i, p)) = power
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p >= 0.0))
        {
            return Err(RadarError::Corrupt(format!("power[{i}] = {p} is not a finite non-negative value")));
        }
        if let Some((i, e)) = elevation
            .iter()
            .enumerate()
            .find(|(_, &e)| e < 1 || e as usize > n_elevation)
        {
            return Err(RadarError::Corrupt(format!(
                "elevation index {e} at element {i} outside 1..={n_elevation}"
            )));
        }
        Ok(Self {
            n_doppler: dims[0],
            n_azimuth: dims[1],
            n_range: dims[2],
            n_elevation,
            power,
            elevation,
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.n_doppler, self.n_azimuth, self.n_range]
    }

    pub fn n_elevation(&self) -> usize {
        self.n_elevation
    }

    pub fn power(&self) -> &[f32] {
        &self.power
    }

    pub fn elevation(&self) -> &[i32] {
        &self.elevation
    }

    pub fn index(&self, d: usize, a: usize, r: usize) -> usize {
        (d * self.n_azimuth + a) * self.n_range + r
    }
}

/// Mean power per spatial cell, laid out `[range][azimuth][elevation]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RaeTensor {
    pub dims: [usize; 3],
    pub data: Vec<f32>,
    /// Doppler bins that landed in each cell (same layout as `data`).
    pub counts: Vec<u32>,
}

impl RaeTensor {
    pub fn get(&self, r: usize, a: usize, e: usize) -> f32 {
        self.data[(r * self.dims[1] + a) * self.dims[2] + e]
    }

    pub fn count(&self, r: usize, a: usize, e: usize) -> u32 {
        self.counts[(r * self.dims[1] + a) * self.dims[2] + e]
    }
}

/// Averages Doppler power into the elevation bin each Doppler cell recorded.
/// Cells that receive no Doppler bin are zero.
pub fn raed_to_rae(t: &RadarTensorRaed) -> RaeTensor {
    let (nd, na, nr, ne) = (t.n_doppler, t.n_azimuth, t.n_range, t.n_elevation);
    // One azimuth row per task: sums[r][e] accumulated in Doppler order.
    let rows = par::map_range(na, |a| {
        let mut sums = vec![0f64; nr * ne];
        let mut counts = vec![0u32; nr * ne];
        for d in 0..nd {
            let base = t.index(d, a, 0);
            for r in 0..nr {
                let e = (t.elevation[base + r] - 1) as usize;
                sums[r * ne + e] += f64::from(t.power[base + r]);
                counts[r * ne + e] += 1;
            }
        }
        (sums, counts)
    });
    let mut data = vec![0f32; nr * na * ne];
    let mut counts_out = vec![0u32; nr * na * ne];
    for (a, (sums, counts)) in rows.into_iter().enumerate() {
        for r in 0..nr {
            for e in 0..ne {
                let n = counts[r * ne + e];
                if n > 0 {
                    let out = (r * na + a) * ne + e;
                    data[out] = (sums[r * ne + e] / f64::from(n)) as f32;
                    counts_out[out] = n;
                }
            }
        }
    }
    RaeTensor {
        dims: [nr, na, ne],
        data,
        counts: counts_out,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(nd: usize, power: impl Fn(usize) -> f32, elev: impl Fn(usize) -> i32) -> RadarTensorRaed {
        RadarTensorRaed::new(
            [nd, 1, 1],
            N_ELEVATION,
            (0..nd).map(power).collect(),
            (0..nd).map(elev).collect(),
        )
        .unwrap()
    }

    #[test]
    fn constant_column() {
        let t = column(128, |_| 2.0, |_| 5);
        let rae = raed_to_rae(&t);
        assert_eq!(rae.dims, [1, 1, 34]);
        assert_eq!(rae.get(0, 0, 4), 2.0);
        for e in (0..34).filter(|&e| e != 4) {
            assert_eq!(rae.get(0, 0, e), 0.0);
        }
    }

    #[test]
    fn two_level_mean() {
        let t = column(128, |d| if d < 64 { 1.0 } else { 3.0 }, |_| 9);
        assert_eq!(raed_to_rae(&t).get(0, 0, 8), 2.0);
    }

    #[test]
    fn rejects_bad_elevation() {
        for bad in [0, 35, -1] {
            let err = RadarTensorRaed::new([1, 1, 1], 34, vec![1.0], vec![bad]).unwrap_err();
            assert!(matches!(err, RadarError::Corrupt(_)));
        }
        assert!(RadarTensorRaed::new([1, 1, 1], 34, vec![f32::NAN], vec![1]).is_err());
        assert!(RadarTensorRaed::new([1, 1, 2], 34, vec![1.0], vec![1]).is_err());
    }

    #[test]
    fn zero_power_gives_zero() {
        let t = column(16, |_| 0.0, |d| (d % 34) as i32 + 1);
        assert!(raed_to_rae(&t).data.iter().all(|&v| v == 0.0));
    }
}
