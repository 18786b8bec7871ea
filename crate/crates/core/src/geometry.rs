//! Ball averages of radial functions.
//!
//! The mean of a radial function over `B(z, r)` depends only on `s = |z|`
//! and `r`. Shell by shell, the sphere `{|y| = u}` meets the ball in a cap
//! of half-angle `θ*` with `cos θ* = (u² + s² − r²) / (2us)`, so
//!
//! ```text
//! mean = (d / r^d) ∫ f̃(u) u^{d−1} cap(u; s, r) du
//! ```
//!
//! where `cap` is the surface fraction of the sphere inside the ball. The
//! component of the vector mean of `g(|y|)·y/|y|` along `z/|z|` uses the
//! first angular moment of the cap instead.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::quad;
use crate::radial::{unit_ball_volume, RadialProfile, SlopeProfile};

/// Dimension-dependent constants of the cap kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapKernelContext {
    d: usize,
    c_d: f64,
    omega_d: f64,
}

impl CapKernelContext {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidGrid("dimension must be at least 1".into()));
        }
        Ok(Self {
            d,
            c_d: sine_power_total(d),
            omega_d: unit_ball_volume(d),
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `∫_0^π sin^{d−2}φ dφ`; for `d = 1` the two-point sphere count 2.
    pub fn c_d(&self) -> f64 {
        self.c_d
    }

    pub fn omega_d(&self) -> f64 {
        self.omega_d
    }

    /// `∫_0^θ sin^{d−2}φ dφ`, closed form for `d <= 3`, 64-point
    /// Gauss-Legendre otherwise.
    pub fn incomplete_sine(&self, theta: f64) -> f64 {
        match self.d {
            1 => f64::NAN,
            2 => theta,
            3 => 1.0 - theta.cos(),
            d => {
                let p = (d - 2) as i32;
                quad::sine_power().integrate(0.0, theta, |phi| phi.sin().powi(p))
            }
        }
    }

    /// Cap fraction from `1 − cos θ*` (clamped to `[0, 2]`).
    #[inline]
    fn cap_from_versine(&self, om: f64) -> f64 {
        let om = om.clamp(0.0, 2.0);
        match self.d {
            2 => 2.0 * (0.5 * om).sqrt().asin() / std::f64::consts::PI,
            3 => 0.5 * om,
            _ => self.incomplete_sine(2.0 * (0.5 * om).sqrt().asin()) / self.c_d,
        }
    }

    /// `sin^{d−1}θ* / ((d − 1) c_d)` from `1 − cos θ*`.
    #[inline]
    fn moment_from_versine(&self, om: f64) -> f64 {
        let om = om.clamp(0.0, 2.0);
        let sin = (om * (2.0 - om)).max(0.0).sqrt();
        match self.d {
            2 => sin / std::f64::consts::PI,
            3 => 0.25 * sin * sin,
            d => sin.powi(d as i32 - 1) / ((d - 1) as f64 * self.c_d),
        }
    }
}

fn sine_power_total(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => std::f64::consts::PI,
        3 => 2.0,
        _ => (d - 3) as f64 / (d - 2) as f64 * sine_power_total(d - 2),
    }
}

/// Widest panel, in the pulled-back variable, integrated by one rule.
const MAX_PANEL: f64 = 0.125;

/// Solves `3x² − 2x³ = y` on `[0, 1]`.
#[inline]
fn inverse_smoothstep(y: f64) -> f64 {
    0.5 - ((1.0 - 2.0 * y).asin() / 3.0).sin()
}

#[inline]
fn versine(u: f64, s: f64, r: f64) -> f64 {
    (r * r - (u - s) * (u - s)) / (2.0 * u * s)
}

fn check_radii(u: f64, s: f64, r: f64) -> Result<()> {
    if !(u > 0.0) {
        return Err(Error::InvalidParameter {
            name: "u",
            reason: format!("sphere radius {u} must be positive"),
        });
    }
    if !(r > 0.0) {
        return Err(Error::InvalidParameter {
            name: "r",
            reason: format!("ball radius {r} must be positive"),
        });
    }
    if !(s >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "s",
            reason: format!("center norm {s} must be nonnegative"),
        });
    }
    Ok(())
}

/// Fraction of the sphere `{|y| = u}` inside `B(z, r)`, `|z| = s`.
pub fn cap_fraction(u: f64, s: f64, r: f64, ctx: &CapKernelContext) -> Result<f64> {
    check_radii(u, s, r)?;
    if ctx.d == 1 {
        let plus = ((u - s).abs() <= r) as u8 as f64;
        let minus = (u + s <= r) as u8 as f64;
        return Ok(0.5 * (plus + minus));
    }
    if u + s <= r {
        return Ok(1.0);
    }
    if u <= s - r || u >= s + r {
        return Ok(0.0);
    }
    Ok(ctx.cap_from_versine(versine(u, s, r)))
}

/// Mean of `cos φ` (angle to `z`) over the sphere, restricted to the cap
/// inside the ball.
pub fn directional_cap_moment(u: f64, s: f64, r: f64, ctx: &CapKernelContext) -> Result<f64> {
    check_radii(u, s, r)?;
    if ctx.d == 1 {
        let plus = ((u - s).abs() <= r) as u8 as f64;
        let minus = (u + s <= r) as u8 as f64;
        return Ok(0.5 * (plus - minus));
    }
    if s == 0.0 {
        return Err(Error::UndefinedDirection { d: ctx.d });
    }
    if u + s <= r || u <= s - r || u >= s + r {
        return Ok(0.0);
    }
    Ok(ctx.moment_from_versine(versine(u, s, r)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    Cap,
    Moment,
}

/// Radial density on `[0, ∞)`, linear on each segment and allowed to jump
/// at knots. Covers profiles `|f̃|`, signed profiles, and piecewise-constant
/// slope profiles alike.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialDensity {
    d: usize,
    knots: Vec<f64>,
    left: Vec<f64>,
    right: Vec<f64>,
    alpha: Vec<f64>,
    gamma: Vec<f64>,
    prefix: Vec<f64>,
    support_end: f64,
}

impl RadialDensity {
    /// Segment `k` runs linearly from `left[k]` at `knots[k]` to `right[k]`
    /// at `knots[k+1]`; zero beyond the last knot.
    pub fn from_pieces(d: usize, knots: Vec<f64>, left: Vec<f64>, right: Vec<f64>) -> Result<Self> {
        let m = knots.len().saturating_sub(1);
        if m == 0 || left.len() != m || right.len() != m {
            return Err(Error::InvalidProfile(
                "density needs one value pair per segment".into(),
            ));
        }
        if knots[0] != 0.0 || knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidProfile(
                "density knots must start at 0 and increase".into(),
            ));
        }
        let mut alpha = Vec::with_capacity(m);
        let mut gamma = Vec::with_capacity(m);
        for k in 0..m {
            let g = (right[k] - left[k]) / (knots[k + 1] - knots[k]);
            gamma.push(g);
            alpha.push(left[k] - g * knots[k]);
        }
        let support_end = (0..m)
            .rev()
            .find(|&k| left[k] != 0.0 || right[k] != 0.0)
            .map_or(0.0, |k| knots[k + 1]);
        let mut out = Self {
            d,
            knots,
            left,
            right,
            alpha,
            gamma,
            prefix: Vec::new(),
            support_end,
        };
        let mut prefix = Vec::with_capacity(m + 1);
        prefix.push(0.0);
        for k in 0..m {
            let step = out.piece_moment(k, out.knots[k], out.knots[k + 1]);
            prefix.push(prefix[k] + step);
        }
        out.prefix = prefix;
        Ok(out)
    }

    /// `|f̃|`, via sign-change node insertion.
    pub fn abs_of(f: &RadialProfile) -> Self {
        Self::signed(&f.modulus())
    }

    pub fn signed(f: &RadialProfile) -> Self {
        let v = f.values();
        let m = v.len() - 1;
        Self::from_pieces(f.d(), f.nodes().to_vec(), v[..m].to_vec(), v[1..].to_vec())
            .expect("profile invariants give a valid density")
    }

    pub fn slopes(g: &SlopeProfile) -> Self {
        let s = g.slopes().to_vec();
        Self::from_pieces(g.d(), g.nodes().to_vec(), s.clone(), s).expect("valid slope profile")
    }

    /// `|g(u)|·u·scale`, the radially weighted gradient mass.
    pub fn radius_weighted(g: &SlopeProfile, scale: f64) -> Self {
        let nodes = g.nodes();
        let left = g
            .slopes()
            .iter()
            .zip(nodes)
            .map(|(s, t)| s.abs() * t * scale)
            .collect();
        let right = g
            .slopes()
            .iter()
            .zip(&nodes[1..])
            .map(|(s, t)| s.abs() * t * scale)
            .collect();
        Self::from_pieces(g.d(), nodes.to_vec(), left, right).expect("valid slope profile")
    }

    pub fn constant(d: usize, value: f64, end: f64) -> Self {
        Self::from_pieces(d, vec![0.0, end], vec![value], vec![value]).expect("valid interval")
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn support_end(&self) -> f64 {
        self.support_end
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn max_abs(&self) -> f64 {
        self.left
            .iter()
            .chain(&self.right)
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `∫_{R^d} |density(|x|)| dx` assuming the density does not change
    /// sign inside a segment (true for moduli and slope profiles).
    pub fn l1_norm(&self) -> f64 {
        let d = self.d;
        let total: f64 = (0..self.alpha.len())
            .map(|k| self.piece_moment(k, self.knots[k], self.knots[k + 1]).abs())
            .sum();
        d as f64 * unit_ball_volume(d) * total
    }

    /// `∫_a^b (α + γu) u^{d−1} du` on segment `k`.
    #[inline]
    fn piece_moment(&self, k: usize, a: f64, b: f64) -> f64 {
        let d = self.d as i32;
        self.alpha[k] * (b.powi(d) - a.powi(d)) / d as f64
            + self.gamma[k] * (b.powi(d + 1) - a.powi(d + 1)) / (d + 1) as f64
    }

    fn segment(&self, u: f64) -> usize {
        (self.knots.partition_point(|&x| x <= u).max(1) - 1).min(self.alpha.len() - 1)
    }

    /// `∫_0^t density(u) u^{d−1} du`.
    pub fn moment_to(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= *self.knots.last().unwrap() {
            return *self.prefix.last().unwrap();
        }
        let k = self.segment(t);
        self.prefix[k] + self.piece_moment(k, self.knots[k], t)
    }

    #[inline]
    fn value_in(&self, k: usize, u: f64) -> f64 {
        self.alpha[k] + self.gamma[k] * u
    }

    pub fn eval(&self, u: f64) -> f64 {
        if u < 0.0 || u >= *self.knots.last().unwrap() {
            return 0.0;
        }
        let k = self.segment(u);
        self.value_in(k, u)
    }

    /// Largest one-sided limit of `|density|` at `t` (the `r -> 0` limit of
    /// non-centered ball means through `t`).
    pub fn point_sup(&self, t: f64) -> f64 {
        let end = *self.knots.last().unwrap();
        if t > end {
            return 0.0;
        }
        let k = self.knots.partition_point(|&x| x < t);
        if k < self.knots.len() && self.knots[k] == t {
            let from_left = if k > 0 { self.right[k - 1].abs() } else { 0.0 };
            let from_right = if k < self.left.len() {
                self.left[k].abs()
            } else {
                0.0
            };
            from_left.max(from_right)
        } else {
            self.eval(t).abs()
        }
    }

    /// `(d / r^d) ∫ density(u) u^{d−1} K(u; s, r) du`.
    pub fn ball_integral(&self, s: f64, r: f64, kernel: Kernel, ctx: &CapKernelContext) -> f64 {
        debug_assert_eq!(ctx.d, self.d);
        if self.d == 1 {
            return self.interval_integral(s, r, kernel);
        }
        let mut acc = 0.0;
        if kernel == Kernel::Cap && r > s {
            acc += self.moment_to(r - s);
        }
        let lo = (s - r).abs();
        let kink_hi = s + r;
        let hi = kink_hi.min(self.support_end);
        if s > 0.0 && lo < hi {
            acc += self.partial_shells(lo, hi, kink_hi, s, r, kernel, ctx);
        }
        acc * self.d as f64 / r.powi(self.d as i32)
    }

    /// Shells crossing the sphere of the ball, `u ∈ [lo, hi] ⊆ [|s−r|, s+r]`.
    ///
    /// The kernels behave like square roots at both ends of `[|s−r|, s+r]`,
    /// so the whole range is pulled back through the smoothstep map
    /// `u = lo + L·(3x² − 2x³)`, which flattens both ends. Pieces between
    /// preimages of the density knots are then smooth in `x`.
    #[allow(clippy::too_many_arguments)]
    fn partial_shells(
        &self,
        lo: f64,
        hi: f64,
        kink_hi: f64,
        s: f64,
        r: f64,
        kernel: Kernel,
        ctx: &CapKernelContext,
    ) -> f64 {
        let p = self.d as i32 - 1;
        let len = kink_hi - lo;
        let pull = |u: f64| inverse_smoothstep(((u - lo) / len).clamp(0.0, 1.0));
        let rule = quad::piece();
        let mut acc = 0.0;
        let mut k = self.segment(lo);
        let mut xa = 0.0;
        while k < self.alpha.len() && self.knots[k] < hi {
            let b = hi.min(self.knots[k + 1]);
            let xb = if b >= kink_hi { 1.0 } else { pull(b) };
            if xb > xa && (self.alpha[k] != 0.0 || self.gamma[k] != 0.0) {
                let panels = ((xb - xa) / MAX_PANEL).ceil() as usize;
                let width = (xb - xa) / panels as f64;
                acc += (0..panels)
                    .map(|j| {
                        let x0 = xa + j as f64 * width;
                        let x1 = if j + 1 == panels { xb } else { x0 + width };
                        rule.integrate(x0, x1, |x| {
                            let u = lo + len * x * x * (3.0 - 2.0 * x);
                            let du = len * 6.0 * x * (1.0 - x);
                            let om = versine(u, s, r);
                            let w = match kernel {
                                Kernel::Cap => ctx.cap_from_versine(om),
                                Kernel::Moment => ctx.moment_from_versine(om),
                            };
                            self.value_in(k, u) * u.powi(p) * w * du
                        })
                    })
                    .sum::<f64>();
            }
            xa = xb;
            k += 1;
        }
        acc
    }

    fn interval_integral(&self, s: f64, r: f64, kernel: Kernel) -> f64 {
        let (a, b) = (s - r, s + r);
        let total = match (kernel, a >= 0.0) {
            (_, true) => self.moment_to(b) - self.moment_to(a),
            (Kernel::Cap, false) => self.moment_to(-a) + self.moment_to(b),
            (Kernel::Moment, false) => self.moment_to(b) - self.moment_to(-a),
        };
        total / (2.0 * r)
    }
}

/// Mean of `|f|` over `B(z, r)` with `|z| = s`.
pub fn ball_average(f: &RadialProfile, s: f64, r: f64, ctx: &CapKernelContext) -> Result<f64> {
    check_ball(s, r)?;
    Ok(RadialDensity::abs_of(f).ball_integral(s, r, Kernel::Cap, ctx))
}

/// Component along `z/|z|` of the mean of `g(|y|)·y/|y|` over `B(z, r)`.
pub fn directional_ball_average(
    g: &SlopeProfile,
    s: f64,
    r: f64,
    ctx: &CapKernelContext,
) -> Result<f64> {
    check_ball(s, r)?;
    if s == 0.0 && ctx.d > 1 {
        return Err(Error::UndefinedDirection { d: ctx.d });
    }
    Ok(RadialDensity::slopes(g).ball_integral(s, r, Kernel::Moment, ctx))
}

fn check_ball(s: f64, r: f64) -> Result<()> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter {
            name: "r",
            reason: format!("ball radius {r} must be positive"),
        });
    }
    if !(s >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "s",
            reason: format!("center norm {s} must be nonnegative"),
        });
    }
    Ok(())
}

pub(crate) fn check_beta(beta: f64, d: usize) -> Result<()> {
    if !(beta >= 0.0 && beta < d as f64) {
        return Err(Error::BetaOutOfRange {
            beta,
            upper: d as f64,
        });
    }
    Ok(())
}

fn check_increasing(name: &str, grid: &[f64], positive: bool) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidGrid(format!("{name} grid is empty")));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidGrid(format!(
            "{name} grid must be strictly increasing"
        )));
    }
    if grid[0] < 0.0 || (positive && grid[0] <= 0.0) {
        return Err(Error::InvalidGrid(format!(
            "{name} grid must be {}",
            if positive { "positive" } else { "nonnegative" }
        )));
    }
    Ok(())
}

/// `A[s][r] = r^β · mean of |f| over any ball with center norm s, radius r`.
#[derive(Debug, Clone, PartialEq)]
pub struct AverageTable {
    d: usize,
    beta: f64,
    s_grid: Vec<f64>,
    r_grid: Vec<f64>,
    means: Vec<f64>,
    values: Vec<f64>,
    point_values: Vec<f64>,
    f_ref: String,
    l1: f64,
    linf: f64,
    support_end: f64,
}

/// Build the table for `|f|`.
pub fn build_average_table(
    f: &RadialProfile,
    beta: f64,
    s_grid: &[f64],
    r_grid: &[f64],
    ctx: &CapKernelContext,
) -> Result<AverageTable> {
    AverageTable::from_density(
        &RadialDensity::abs_of(f),
        &f.content_hash(),
        beta,
        s_grid,
        r_grid,
        ctx,
    )
}

impl AverageTable {
    /// Every cell is computed independently with a fixed inner summation
    /// order, so the result does not depend on the thread schedule.
    pub fn from_density(
        dens: &RadialDensity,
        f_ref: &str,
        beta: f64,
        s_grid: &[f64],
        r_grid: &[f64],
        ctx: &CapKernelContext,
    ) -> Result<Self> {
        check_beta(beta, dens.d)?;
        if ctx.d != dens.d {
            return Err(Error::DimensionMismatch {
                expected: dens.d,
                got: ctx.d,
            });
        }
        check_increasing("s", s_grid, false)?;
        check_increasing("r", r_grid, true)?;
        let nr = r_grid.len();
        let end = dens.support_end();
        let means: Vec<f64> = s_grid
            .par_iter()
            .flat_map_iter(|&s| {
                r_grid.iter().map(move |&r| {
                    if s - r >= end {
                        0.0
                    } else {
                        dens.ball_integral(s, r, Kernel::Cap, ctx).max(0.0)
                    }
                })
            })
            .collect();
        debug_assert_eq!(means.len(), s_grid.len() * nr);
        let point_values = s_grid.iter().map(|&s| dens.point_sup(s)).collect();
        let mut table = Self {
            d: dens.d,
            beta,
            s_grid: s_grid.to_vec(),
            r_grid: r_grid.to_vec(),
            means,
            values: Vec::new(),
            point_values,
            f_ref: f_ref.to_string(),
            l1: dens.l1_norm(),
            linf: dens.max_abs(),
            support_end: end,
        };
        table.values = table.weighted(beta);
        Ok(table)
    }

    fn weighted(&self, beta: f64) -> Vec<f64> {
        let nr = self.r_grid.len();
        self.means
            .iter()
            .enumerate()
            .map(|(idx, m)| self.r_grid[idx % nr].powf(beta) * m)
            .collect()
    }

    /// Same averages, different fractional order.
    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        check_beta(beta, self.d)?;
        let mut out = self.clone();
        out.beta = beta;
        out.values = out.weighted(beta);
        Ok(out)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn s_grid(&self) -> &[f64] {
        &self.s_grid
    }

    pub fn r_grid(&self) -> &[f64] {
        &self.r_grid
    }

    pub fn f_ref(&self) -> &str {
        &self.f_ref
    }

    /// `‖f‖_{L¹(R^d)}` of the source function.
    pub fn l1(&self) -> f64 {
        self.l1
    }

    pub fn linf(&self) -> f64 {
        self.linf
    }

    pub fn support_end(&self) -> f64 {
        self.support_end
    }

    #[inline]
    pub fn value(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.r_grid.len() + k]
    }

    #[inline]
    pub fn mean(&self, i: usize, k: usize) -> f64 {
        self.means[i * self.r_grid.len() + k]
    }

    /// `|f̃(s_i)|`, the degenerate `r = 0` cell.
    pub fn point_value(&self, i: usize) -> f64 {
        self.point_values[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Cache key: source hash, β, and both grids.
    pub fn cache_key(&self) -> String {
        table_key(&self.f_ref, self.beta, &self.s_grid, &self.r_grid)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let nr = self.r_grid.len();
        let rows = self
            .values
            .iter()
            .enumerate()
            .map(|(idx, &v)| vec![self.s_grid[idx / nr], self.r_grid[idx % nr], v]);
        crate::csvio::write_rows(path, &["s", "r", "value"], rows)
    }

    pub fn cache_path(&self, dir: impl AsRef<Path>) -> PathBuf {
        dir.as_ref().join(format!("{}.fmt", self.cache_key()))
    }

    /// Write the binary cache file into `dir`, returning its path.
    ///
    /// Layout (little endian): magic `FMXT`, u32 version, u64 d, u64 Ns,
    /// u64 Nr, f64 beta, l1, linf, support_end, then the s grid, r grid,
    /// means (row-major, s outer), point values; then the source hash as
    /// u64 length + UTF-8 bytes.
    pub fn save_cache(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let path = self.cache_path(&dir);
        let mut buf = Vec::with_capacity(
            8 * (self.means.len() + 2 * self.s_grid.len() + self.r_grid.len() + 16),
        );
        buf.extend_from_slice(CACHE_MAGIC);
        buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
        for n in [self.d, self.s_grid.len(), self.r_grid.len()] {
            buf.extend_from_slice(&(n as u64).to_le_bytes());
        }
        for v in [self.beta, self.l1, self.linf, self.support_end]
            .iter()
            .chain(&self.s_grid)
            .chain(&self.r_grid)
            .chain(&self.means)
            .chain(&self.point_values)
        {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&(self.f_ref.len() as u64).to_le_bytes());
        buf.extend_from_slice(self.f_ref.as_bytes());
        std::fs::File::create(&path)?.write_all(&buf)?;
        Ok(path)
    }

    pub fn load_cache(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut cur = Cursor {
            bytes: &bytes,
            pos: 0,
        };
        if cur.take(4)? != CACHE_MAGIC {
            return Err(Error::Cache("bad magic".into()));
        }
        let version = u32::from_le_bytes(cur.take(4)?.try_into().unwrap());
        if version != CACHE_VERSION {
            return Err(Error::Cache(format!("unsupported version {version}")));
        }
        let d = cur.u64()? as usize;
        let ns = cur.u64()? as usize;
        let nr = cur.u64()? as usize;
        let beta = cur.f64()?;
        let l1 = cur.f64()?;
        let linf = cur.f64()?;
        let support_end = cur.f64()?;
        let s_grid = cur.f64s(ns)?;
        let r_grid = cur.f64s(nr)?;
        let means = cur.f64s(ns * nr)?;
        let point_values = cur.f64s(ns)?;
        let len = cur.u64()? as usize;
        let f_ref = String::from_utf8(cur.take(len)?.to_vec())
            .map_err(|_| Error::Cache("source hash is not UTF-8".into()))?;
        if cur.pos != bytes.len() {
            return Err(Error::Cache("trailing bytes".into()));
        }
        let mut table = Self {
            d,
            beta,
            s_grid,
            r_grid,
            means,
            values: Vec::new(),
            point_values,
            f_ref,
            l1,
            linf,
            support_end,
        };
        table.values = table.weighted(beta);
        Ok(table)
    }
}

const CACHE_MAGIC: &[u8; 4] = b"FMXT";
const CACHE_VERSION: u32 = 1;

pub fn table_key(f_ref: &str, beta: f64, s_grid: &[f64], r_grid: &[f64]) -> String {
    let mut grid = Sha256::new();
    for v in s_grid {
        grid.update(v.to_le_bytes());
    }
    grid.update(b"|");
    for v in r_grid {
        grid.update(v.to_le_bytes());
    }
    let grid_hash = hex::encode(grid.finalize());
    format!("{}-{:016x}-{}", f_ref, beta.to_bits(), &grid_hash[..16])
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Cache("truncated file".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::{make_profile, ProfileSpec, RadialGrid};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn ctx(d: usize) -> CapKernelContext {
        CapKernelContext::new(d).unwrap()
    }

    #[test]
    fn sphere_constants() {
        assert_relative_eq!(ctx(2).c_d(), PI);
        assert_relative_eq!(ctx(3).c_d(), 2.0);
        assert_relative_eq!(ctx(4).c_d(), PI / 2.0);
        for d in 4..8 {
            let c = ctx(d);
            assert_relative_eq!(c.incomplete_sine(PI), c.c_d(), epsilon = 1e-12);
        }
    }

    #[test]
    fn incomplete_sine_matches_reduction_formula() {
        // I_n(θ) = −cos θ sin^{n−1}θ / n + (n−1)/n · I_{n−2}(θ)
        fn reduction(n: i32, th: f64) -> f64 {
            match n {
                0 => th,
                1 => 1.0 - th.cos(),
                _ => {
                    -th.cos() * th.sin().powi(n - 1) / n as f64
                        + (n - 1) as f64 / n as f64 * reduction(n - 2, th)
                }
            }
        }
        for d in 4..9 {
            for th in [0.1, 0.7, 1.5, 2.9] {
                assert_relative_eq!(
                    ctx(d).incomplete_sine(th),
                    reduction(d as i32 - 2, th),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn cap_fraction_examples() {
        assert_eq!(cap_fraction(0.5, 0.0, 1.0, &ctx(2)).unwrap(), 1.0);
        assert_relative_eq!(
            cap_fraction(1.0, 1.0, 1.0, &ctx(2)).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            cap_fraction(1.0, 1.0, 1.0, &ctx(3)).unwrap(),
            0.25,
            epsilon = 1e-14
        );
        assert_eq!(cap_fraction(3.0, 1.0, 1.0, &ctx(2)).unwrap(), 0.0);
        assert!(cap_fraction(0.0, 1.0, 1.0, &ctx(2)).is_err());
        assert!(cap_fraction(1.0, 1.0, -1.0, &ctx(2)).is_err());
    }

    #[test]
    fn cap_fraction_d4_matches_closed_form() {
        // d = 4: ∫_0^θ sin² = θ/2 − sin 2θ/4, c_4 = π/2
        let (u, s, r) = (1.0, 1.2, 0.9);
        let cos = (u * u + s * s - r * r) / (2.0 * u * s);
        let th: f64 = f64::acos(cos);
        let expect = (th / 2.0 - (2.0 * th).sin() / 4.0) / (PI / 2.0);
        assert_relative_eq!(
            cap_fraction(u, s, r, &ctx(4)).unwrap(),
            expect,
            epsilon = 1e-12
        );
    }

    #[test]
    fn cap_fraction_one_dimensional() {
        let c = ctx(1);
        assert_eq!(cap_fraction(0.5, 0.0, 1.0, &c).unwrap(), 1.0);
        assert_eq!(cap_fraction(1.5, 1.0, 1.0, &c).unwrap(), 0.5);
        assert_eq!(cap_fraction(2.5, 1.0, 1.0, &c).unwrap(), 0.0);
    }

    #[test]
    fn moment_examples() {
        assert_eq!(directional_cap_moment(0.5, 0.2, 1.0, &ctx(2)).unwrap(), 0.0);
        assert_relative_eq!(
            directional_cap_moment(1.0, 1.0, 1.0, &ctx(2)).unwrap(),
            (PI / 3.0).sin() / PI,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            directional_cap_moment(1.0, 1.0, 1.0, &ctx(3)).unwrap(),
            3.0 / 16.0,
            epsilon = 1e-14
        );
        assert!(matches!(
            directional_cap_moment(1.0, 0.0, 1.0, &ctx(2)),
            Err(Error::UndefinedDirection { d: 2 })
        ));
    }

    #[test]
    fn moment_matches_angular_quadrature() {
        // direct ∫_0^θ cos φ sin^{d−2}φ dφ / c_d
        for d in 2..6 {
            let c = ctx(d);
            let (u, s, r): (f64, f64, f64) = (0.8, 1.0, 0.7);
            let th = ((u * u + s * s - r * r) / (2.0 * u * s)).acos();
            let p = d as i32 - 2;
            let direct = crate::quad::sine_power()
                .integrate(0.0, th, |phi| phi.cos() * phi.sin().powi(p))
                / c.c_d();
            assert_relative_eq!(
                directional_cap_moment(u, s, r, &c).unwrap(),
                direct,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn cap_fraction_monotone_in_r() {
        let c = ctx(2);
        for &u in &[0.3, 1.0, 1.7] {
            for &s in &[0.0, 0.4, 1.1] {
                let mut prev = 0.0;
                for k in 1..200 {
                    let r = k as f64 * 0.02;
                    let v = cap_fraction(u, s, r, &c).unwrap();
                    assert!(v + 1e-9 >= prev, "u={u} s={s} r={r}");
                    prev = v;
                }
            }
        }
    }

    fn tent(d: usize) -> RadialProfile {
        make_profile(
            &ProfileSpec::Tent { a: 1.0 },
            &RadialGrid::new(d, 0.01, 2.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn ball_average_examples() {
        // f̃(u) = u near the origin, s = 0, r = 1, d = 2 → 2 ∫ u·u du = 2/3
        let f = RadialProfile::from_uniform(2, 0.5, vec![0.0, 0.5, 1.0, 1.5, 0.0]).unwrap();
        assert_relative_eq!(
            ball_average(&f, 0.0, 1.0, &ctx(2)).unwrap(),
            2.0 / 3.0,
            epsilon = 1e-12
        );
        let t = tent(2);
        assert_eq!(ball_average(&t, 3.0, 1.0, &ctx(2)).unwrap(), 0.0);
        assert!(ball_average(&t, 1.0, 0.0, &ctx(2)).is_err());
    }

    #[test]
    fn ball_average_of_plateau_is_one() {
        let f = make_profile(
            &ProfileSpec::SmoothedIndicator { a: 3.0, ramp: 0.5 },
            &RadialGrid::new(2, 0.05, 4.0).unwrap(),
        )
        .unwrap();
        for d in [2, 3] {
            let f = RadialProfile::new(d, f.h(), f.nodes().to_vec(), f.values().to_vec()).unwrap();
            for &(s, r) in &[(0.0, 1.0), (1.0, 1.0), (2.0, 0.05), (0.3, 2.6), (1.5, 1.2)] {
                assert_relative_eq!(
                    ball_average(&f, s, r, &ctx(d)).unwrap(),
                    1.0,
                    epsilon = 1e-6
                );
            }
        }
    }

    #[test]
    fn kernel_mass_is_ball_volume() {
        for d in [2, 3, 4] {
            let c = ctx(d);
            for &s in &[0.01, 0.5, 1.0, 2.0, 5.0] {
                for &r in &[0.01, 0.3, 1.0, 2.5] {
                    let dens = RadialDensity::constant(d, 1.0, s + r + 1.0);
                    let m = dens.ball_integral(s, r, Kernel::Cap, &c);
                    assert!((m - 1.0).abs() < 1e-9, "d={d} s={s} r={r}: {m}");
                }
            }
        }
    }

    #[test]
    fn tent_d1_weighted_mean() {
        // r^β (1 − r/2) at β = 1/2, r = 2/3
        let table = build_average_table(&tent(1), 0.5, &[0.0], &[2.0 / 3.0], &ctx(1)).unwrap();
        let expect = (2.0_f64 / 3.0).powf(1.5);
        assert_relative_eq!(table.value(0, 0), expect, epsilon = 1e-12);
    }

    #[test]
    fn directional_average_vanishes_for_centered_full_containment() {
        let g = tent(2).weak_derivative();
        let dens = RadialDensity::slopes(&g);
        // s small, r large: every contributing shell is fully inside
        let v = dens.ball_integral(1e-9, 3.0, Kernel::Moment, &ctx(2));
        assert!(v.abs() < 1e-12);
        assert!(directional_ball_average(&g, 0.0, 1.0, &ctx(2)).is_err());
    }

    #[test]
    fn one_dimensional_directional_average_is_difference() {
        // ∫ (|f|)'(|y|) sign(y) over [a, b] = |f|(b) − |f|(a)
        let f = tent(1);
        let g = f.weak_derivative();
        let (s, r) = (0.6, 0.3);
        let got = directional_ball_average(&g, s, r, &ctx(1)).unwrap();
        assert_relative_eq!(
            got,
            (f.eval(s + r) - f.eval(s - r)) / (2.0 * r),
            epsilon = 1e-12
        );
    }

    #[test]
    fn table_rejects_bad_input() {
        let f = tent(2);
        let c = ctx(2);
        assert!(matches!(
            build_average_table(&f, 2.0, &[0.0], &[1.0], &c),
            Err(Error::BetaOutOfRange { .. })
        ));
        assert!(build_average_table(&f, 0.5, &[0.0, 0.0], &[1.0], &c).is_err());
        assert!(build_average_table(&f, 0.5, &[0.0], &[0.0, 1.0], &c).is_err());
    }

    #[test]
    fn table_cache_round_trip() {
        let f = tent(2);
        let s: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let r: Vec<f64> = (1..15).map(|i| i as f64 * 0.1).collect();
        let table = build_average_table(&f, 0.5, &s, &r, &ctx(2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = table.save_cache(dir.path()).unwrap();
        assert!(path
            .file_name()
            .unwrap()
            .to_str()
            .unwrap()
            .starts_with(&f.content_hash()));
        let back = AverageTable::load_cache(&path).unwrap();
        assert_eq!(back, table);
        let csv = dir.path().join("t.csv");
        table.write_csv(&csv).unwrap();
        assert!(std::fs::read_to_string(csv)
            .unwrap()
            .starts_with("s,r,value\n"));
    }

    #[test]
    fn truncated_cache_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.fmt");
        std::fs::write(&p, b"FMXT\x01\x00\x00\x00\x02").unwrap();
        assert!(matches!(AverageTable::load_cache(&p), Err(Error::Cache(_))));
    }
}
