use std::sync::OnceLock;

use super::{PlotFrame, Region, SNAP};

/// Exact squared Euclidean distance, in pixel units, from every cell center
/// to the nearest member cell center of a region.
///
/// Computed with the separable lower-envelope transform (Felzenszwalb and
/// Huttenlocher), so thresholding the field at any radius gives the same
/// cells as a brute-force dilation.
#[derive(Debug)]
pub struct DistanceField {
    frame: PlotFrame,
    squared: Vec<f64>,
    sorted: OnceLock<Vec<f64>>,
}

impl DistanceField {
    pub fn from_region(region: &Region) -> Self {
        let frame = *region.frame();
        let (w, h) = (frame.width(), frame.height());
        let mut grid = vec![f64::INFINITY; w * h];
        for (i, j) in region.cells() {
            grid[j * w + i] = 0.0;
        }

        let n = w.max(h);
        let mut f = vec![0.0; n];
        let mut out = vec![0.0; n];
        let mut v = vec![0usize; n];
        let mut z = vec![0.0; n + 1];

        for i in 0..w {
            for j in 0..h {
                f[j] = grid[j * w + i];
            }
            lower_envelope(&f[..h], &mut out[..h], &mut v, &mut z);
            for j in 0..h {
                grid[j * w + i] = out[j];
            }
        }
        for j in 0..h {
            let row = &mut grid[j * w..(j + 1) * w];
            f[..w].copy_from_slice(row);
            lower_envelope(&f[..w], &mut out[..w], &mut v, &mut z);
            row.copy_from_slice(&out[..w]);
        }

        DistanceField {
            frame,
            squared: grid,
            sorted: OnceLock::new(),
        }
    }

    pub fn frame(&self) -> &PlotFrame {
        &self.frame
    }

    /// Squared distance in pixels from cell `(i, j)`; infinite for an empty source.
    pub fn squared_pixels(&self, i: usize, j: usize) -> f64 {
        self.squared[j * self.frame.width() + i]
    }

    fn threshold(&self, dist: f64) -> f64 {
        let r = dist / self.frame.resolution() + SNAP;
        r * r
    }

    /// Cells within `dist` meters of the source region.
    pub fn within(&self, dist: f64) -> Region {
        let t = self.threshold(dist);
        let w = self.frame.width();
        Region::from_predicate(&self.frame, |i, j| self.squared[j * w + i] <= t)
    }

    /// Cells farther than `inner` and no farther than `outer` meters.
    pub fn ring(&self, inner: f64, outer: f64) -> Region {
        let (lo, hi) = (self.threshold(inner), self.threshold(outer));
        let w = self.frame.width();
        Region::from_predicate(&self.frame, |i, j| {
            let d = self.squared[j * w + i];
            d > lo && d <= hi
        })
    }

    /// `pixel_count(self.within(dist))` in logarithmic time after the first call.
    pub fn count_within(&self, dist: f64) -> u64 {
        let sorted = self.sorted.get_or_init(|| {
            let mut s: Vec<f64> = self
                .squared
                .iter()
                .copied()
                .filter(|d| d.is_finite())
                .collect();
            s.sort_by(f64::total_cmp);
            s
        });
        let t = self.threshold(dist);
        sorted.partition_point(|&d| d <= t) as u64
    }
}

/// One-dimensional squared distance transform of sampled function `f`
/// (zero at sources, infinite elsewhere).
fn lower_envelope(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k: usize = 0;
    let mut started = false;
    for q in 0..n {
        if f[q].is_infinite() {
            continue;
        }
        if !started {
            started = true;
            v[0] = q;
            z[0] = f64::NEG_INFINITY;
            z[1] = f64::INFINITY;
            continue;
        }
        let qf = q as f64;
        let mut s;
        loop {
            let p = v[k] as f64;
            s = ((f[q] + qf * qf) - (f[v[k]] + p * p)) / (2.0 * qf - 2.0 * p);
            if s <= z[k] {
                // z[0] is -inf, so this never pops the first parabola
                k -= 1;
            } else {
                break;
            }
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    if !started {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate().take(n) {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let d = qf - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}
