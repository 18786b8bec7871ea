//! Brute-force 2D maximal function on a square grid, with no radial
//! reduction. Slow on purpose: it cross-checks the `(s, r)` pipeline.

use std::path::Path;

use rayon::prelude::*;

use crate::derivative::median;
use crate::error::{invalid, Error, Result};
use crate::maximal::MaximalResult;
use crate::radial::RadialProfile;

/// Samples on `[−L, L]²` at spacing `h2`, row-major with `y` outer.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    half_width: f64,
    h2: f64,
    n: usize,
    samples: Vec<f64>,
    /// Set on oracle output.
    beta: Option<f64>,
}

impl Grid2D {
    pub fn new(half_width: f64, h2: f64, samples: Vec<f64>) -> Result<Self> {
        let n = side(half_width, h2)?;
        if samples.len() != n * n {
            return Err(invalid("samples", format!("expected {} samples, got {}", n * n, samples.len())));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(invalid("samples", "non-finite sample"));
        }
        let g = Self {
            half_width,
            h2,
            n,
            samples,
            beta: None,
        };
        let boundary_nonzero = (0..n).any(|i| {
            g.at(i, 0) != 0.0 || g.at(i, n - 1) != 0.0 || g.at(0, i) != 0.0 || g.at(n - 1, i) != 0.0
        });
        if boundary_nonzero {
            return Err(invalid("samples", "boundary samples must vanish"));
        }
        Ok(g)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn h2(&self) -> f64 {
        self.h2
    }

    /// Samples per side.
    pub fn side(&self) -> usize {
        self.n
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn beta(&self) -> Option<f64> {
        self.beta
    }

    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 - self.centre_index() as f64) * self.h2
    }

    /// Sample at column `i` (x) and row `k` (y).
    pub fn at(&self, i: usize, k: usize) -> f64 {
        self.samples[k * self.n + i]
    }

    fn centre_index(&self) -> usize {
        self.n / 2
    }

    /// `Σ g · h2²`.
    pub fn integral(&self) -> f64 {
        self.samples.iter().map(|v| v.abs()).sum::<f64>() * self.h2 * self.h2
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let n = self.n;
        let rows = (0..n * n).map(|idx| {
            let (k, i) = (idx / n, idx % n);
            vec![self.coord(i), self.coord(k), self.samples[idx]]
        });
        crate::csvio::write_rows(path, &["x", "y", "value"], rows)
    }
}

fn side(half_width: f64, h2: f64) -> Result<usize> {
    if !(h2 > 0.0 && half_width > 0.0 && h2.is_finite() && half_width.is_finite()) {
        return Err(invalid("h2", format!("need positive extent and spacing, got L = {half_width}, h2 = {h2}")));
    }
    let cells = 2.0 * half_width / h2;
    let m = cells.round();
    if (cells - m).abs() > 1e-9 * cells.max(1.0) || m < 2.0 || m as usize % 2 != 0 {
        return Err(invalid(
            "h2",
            format!("2L/h2 = {cells} must be an even integer so that the origin is a sample"),
        ));
    }
    Ok(m as usize + 1)
}

/// `g(x) = f̃(|x|)` on `[−L, L]²`.
pub fn rasterize_radial(f: &RadialProfile, half_width: f64, h2: f64) -> Result<Grid2D> {
    if f.d() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: f.d() });
    }
    if half_width < f.t_max() {
        return Err(invalid("L", format!("L = {half_width} must be at least t_max = {}", f.t_max())));
    }
    let n = side(half_width, h2)?;
    let coord = |i: usize| (i as f64 - (n / 2) as f64) * h2;
    let samples = (0..n * n)
        .map(|idx| {
            let (k, i) = (idx / n, idx % n);
            let t = coord(i).hypot(coord(k));
            if t >= f.t_max() {
                0.0
            } else {
                f.eval(t)
            }
        })
        .collect();
    Grid2D::new(half_width, h2, samples)
}

/// Lattice offsets inside a disk of radius `r` around a sample, by row.
struct Stencil {
    /// Per row offset `dk ∈ [−m, m]`, the half-width in columns.
    spans: Vec<(i64, i64)>,
    count: usize,
}

impl Stencil {
    fn new(r: f64, h2: f64) -> Self {
        let m = (r / h2 + 1e-9).floor() as i64;
        let mut spans = Vec::with_capacity(2 * m as usize + 1);
        let mut count = 0;
        for dk in -m..=m {
            let y = dk as f64 * h2;
            let w = ((r * r - y * y).max(0.0).sqrt() / h2 + 1e-9).floor() as i64;
            spans.push((dk, w));
            count += 2 * w as usize + 1;
        }
        Self { spans, count }
    }
}

/// `M_β g` by exhaustive search: centers on every `center_stride`-th
/// sample, radii from `radius_set`, ball means by masked summation over
/// sample centres. Samples outside the square count as zero.
pub fn oracle_maximal_2d(g: &Grid2D, beta: f64, center_stride: usize, radius_set: &[f64]) -> Result<Grid2D> {
    if radius_set.is_empty() {
        return Err(invalid("radius_set", "radius set is empty"));
    }
    if radius_set.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(invalid("radius_set", "radii must be positive and finite"));
    }
    if !(0.0..2.0).contains(&beta) {
        return Err(Error::BetaOutOfRange { beta, upper: 2.0 });
    }
    if center_stride == 0 {
        return Err(invalid("center_stride", "stride must be at least 1"));
    }
    let n = g.n;
    let h2 = g.h2;
    let c0 = g.centre_index();
    // row prefix sums of |g|
    let prefix: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let mut p = vec![0.0; n + 1];
            for i in 0..n {
                p[i + 1] = p[i] + g.at(i, k).abs();
            }
            p
        })
        .collect();
    let row_sum = |k: i64, lo: i64, hi: i64| -> f64 {
        if k < 0 || k >= n as i64 {
            return 0.0;
        }
        let lo = lo.clamp(0, n as i64) as usize;
        let hi = (hi + 1).clamp(0, n as i64) as usize;
        if hi <= lo {
            0.0
        } else {
            prefix[k as usize][hi] - prefix[k as usize][lo]
        }
    };
    // keep the origin on the center lattice
    let first = c0 % center_stride;
    let centres: Vec<usize> = (first..n).step_by(center_stride).collect();
    let mut radii = radius_set.to_vec();
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    let stencils: Vec<Stencil> = radii.iter().map(|&r| Stencil::new(r, h2)).collect();

    // per center: suffix maxima over the sorted radii
    let best: Vec<(f64, f64, Vec<f64>)> = centres
        .par_iter()
        .flat_map_iter(|&ck| {
            let (radii, stencils, row_sum) = (&radii, &stencils, &row_sum);
            centres.iter().map(move |&ci| {
                let mut vals: Vec<f64> = radii
                    .iter()
                    .zip(stencils)
                    .map(|(r, st)| {
                        let sum: f64 = st
                            .spans
                            .iter()
                            .map(|&(dk, w)| row_sum(ck as i64 + dk, ci as i64 - w, ci as i64 + w))
                            .sum();
                        r.powf(beta) * sum / st.count as f64
                    })
                    .collect();
                for j in (0..vals.len().saturating_sub(1)).rev() {
                    vals[j] = vals[j].max(vals[j + 1]);
                }
                (g.coord(ci), g.coord(ck), vals)
            })
        })
        .collect();

    let samples: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (x, y) = (g.coord(idx % n), g.coord(idx / n));
            best.iter()
                .filter_map(|(cx, cy, vals)| {
                    let dist = (x - cx).hypot(y - cy);
                    let j = radii.partition_point(|&r| r < dist * (1.0 - 1e-12));
                    vals.get(j).copied()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(Grid2D {
        half_width: g.half_width,
        h2,
        n,
        samples,
        beta: Some(beta),
    })
}

/// Direction of the sampling ray through the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ray {
    Axis,
    Diagonal,
}

impl Ray {
    /// Sample points `(t, value)` of the field along the ray.
    pub fn samples(self, g: &Grid2D) -> Vec<(f64, f64)> {
        let c = g.centre_index();
        (0..=c)
            .map(|m| match self {
                Ray::Axis => (m as f64 * g.h2, g.at(c + m, c)),
                Ray::Diagonal => (m as f64 * g.h2 * std::f64::consts::SQRT_2, g.at(c + m, c + m)),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapStats {
    pub points: usize,
    pub max_rel: f64,
    pub median_rel: f64,
    /// Radius of the largest gap.
    pub argmax_t: f64,
}

/// Linear interpolation of a radial result at `t`, `None` outside its grid.
fn interpolate(result: &MaximalResult, t: f64) -> Option<f64> {
    let grid = &result.eval_grid;
    let (first, last) = (*grid.first()?, *grid.last()?);
    if t < first - 1e-12 || t > last + 1e-12 {
        return None;
    }
    let k = grid.partition_point(|&a| a <= t).clamp(1, grid.len().max(2) - 1);
    if grid.len() == 1 {
        return Some(result.values[0]);
    }
    let (a, b) = (grid[k - 1], grid[k]);
    let w = ((t - a) / (b - a)).clamp(0.0, 1.0);
    Some(result.values[k - 1] * (1.0 - w) + result.values[k] * w)
}

/// Relative gap `|oracle − radial| / radial` at the ray samples lying in
/// the radial evaluation window with `t ≤ t_limit`.
pub fn compare_with_radial(oracle: &Grid2D, radial: &MaximalResult, ray: Ray, t_limit: f64) -> Result<GapStats> {
    let beta = oracle
        .beta
        .ok_or_else(|| invalid("oracle", "grid is not an oracle output"))?;
    if beta != radial.beta() {
        return Err(Error::BetaMismatch {
            left: beta,
            right: radial.beta(),
        });
    }
    if radial.d != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: radial.d });
    }
    let scale = radial.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut gaps = Vec::new();
    let mut argmax_t = 0.0;
    let mut max_rel = 0.0_f64;
    for (t, v) in ray.samples(oracle) {
        if t > t_limit {
            break;
        }
        let Some(r) = interpolate(radial, t) else { continue };
        let gap = if r <= 1e-12 * scale || scale == 0.0 {
            (v - r).abs()
        } else {
            (v - r).abs() / r
        };
        if gap > max_rel {
            max_rel = gap;
            argmax_t = t;
        }
        gaps.push(gap);
    }
    Ok(GapStats {
        points: gaps.len(),
        median_rel: median(gaps.clone()).unwrap_or(0.0),
        max_rel,
        argmax_t,
    })
}
