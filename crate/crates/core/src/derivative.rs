//! Derivatives of maximal functions and the pointwise inequalities they
//! satisfy.

use std::fmt;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{CapKernelContext, Kernel, RadialDensity};
use crate::maximal::{maximal_density, maximal_profile_with_step, uniform_grid, MaximalResult, VariantKind};
use crate::radial::{endpoint_exponent, sphere_measure, unit_ball_volume, RadialProfile};

/// Denominators below this are skipped in ratio reports.
pub const RATIO_FLOOR: f64 = 1e-12;

/// Points with `|fd| < ACTIVITY * max |fd|` are left out of comparisons.
pub const ACTIVITY: f64 = 0.05;

/// Good balls evaluated per point by [`luiro_gradient`].
pub const MAX_LUIRO_BALLS: usize = 64;

/// Radial derivative of the sampled maximal function: central differences
/// inside, one-sided at both ends.
pub fn fd_gradient(result: &MaximalResult) -> Result<Vec<f64>> {
    fd_samples(&result.eval_grid, &result.values)
}

pub fn fd_samples(t: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let n = t.len();
    if n < 3 {
        return Err(Error::InvalidGrid(format!(
            "finite differences need at least 3 points, got {n}"
        )));
    }
    let h = t[1] - t[0];
    if t.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * (1.0 + h)) || !(h > 0.0) {
        return Err(Error::InvalidGrid("finite differences need a uniform grid".into()));
    }
    let mut out = Vec::with_capacity(n);
    out.push((v[1] - v[0]) / h);
    out.extend((1..n - 1).map(|i| (v[i + 1] - v[i - 1]) / (2.0 * h)));
    out.push((v[n - 1] - v[n - 2]) / h);
    Ok(out)
}

/// `r^β ⨍_B ∇|f| · x̂` for every good ball at every point, with the ball
/// centered on the ray through the point.
#[derive(Debug, Clone, PartialEq)]
pub struct LuiroSamples {
    /// Per point, one value per evaluated good ball (radius-zero cells are
    /// skipped).
    pub candidates: Vec<Vec<f64>>,
    /// Per point, the largest difference between candidates.
    pub spread: Vec<f64>,
}

pub fn luiro_gradient(f: &RadialProfile, result: &MaximalResult) -> Result<LuiroSamples> {
    if f.d() != result.d {
        return Err(Error::DimensionMismatch {
            expected: result.d,
            got: f.d(),
        });
    }
    let dens = RadialDensity::slopes(&f.modulus().weak_derivative());
    let ctx = CapKernelContext::new(f.d())?;
    let beta = result.beta();
    let candidates: Vec<Vec<f64>> = result
        .good
        .par_iter()
        .map(|g| {
            let balls: Vec<_> = g.balls.iter().filter(|b| b.r > 0.0).collect();
            let stride = balls.len().div_ceil(MAX_LUIRO_BALLS).max(1);
            balls
                .iter()
                .step_by(stride)
                .map(|b| {
                    if b.s == 0.0 && f.d() > 1 {
                        0.0
                    } else {
                        b.r.powf(beta) * dens.ball_integral(b.s, b.r, Kernel::Moment, &ctx)
                    }
                })
                .collect()
        })
        .collect();
    let spread = candidates
        .iter()
        .map(|c| {
            let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if c.is_empty() {
                0.0
            } else {
                hi - lo
            }
        })
        .collect();
    Ok(LuiroSamples { candidates, spread })
}

/// Finite differences against Luiro's formula on one maximal function.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientPair {
    pub eval_grid: Vec<f64>,
    pub fd: Vec<f64>,
    /// Candidate closest to `fd` (NaN where no positive-radius ball exists).
    pub luiro: Vec<f64>,
    /// Index into the good-ball list of the chosen candidate.
    pub chosen: Vec<Option<usize>>,
    pub spread: Vec<f64>,
    pub mask: Vec<bool>,
}

impl GradientPair {
    /// The mask keeps interior points (not `t = 0`, not the window ends)
    /// with positive value, `|fd| ≥ 5%` of its maximum, and a good-ball set
    /// concentrated within two grid steps.
    pub fn new(f: &RadialProfile, result: &MaximalResult) -> Result<Self> {
        let fd = fd_gradient(result)?;
        let samples = luiro_gradient(f, result)?;
        let fd_max = fd.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let n = fd.len();
        let mut luiro = Vec::with_capacity(n);
        let mut chosen = Vec::with_capacity(n);
        let mut mask = Vec::with_capacity(n);
        for i in 0..n {
            let cands = &samples.candidates[i];
            let pick = cands
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - fd[i]).abs().total_cmp(&(b.1 - fd[i]).abs()))
                .map(|(j, v)| (j, *v));
            luiro.push(pick.map_or(f64::NAN, |p| p.1));
            chosen.push(pick.map(|p| p.0));
            let g = &result.good[i];
            let t = result.eval_grid[i];
            let concentrated = ball_extent(g) <= 2.0 * result.step + 1e-12;
            mask.push(
                i > 0
                    && i + 1 < n
                    && t > 0.0
                    && g.value > 0.0
                    && pick.is_some()
                    && fd[i].abs() >= ACTIVITY * fd_max
                    && fd_max > 0.0
                    && concentrated,
            );
        }
        Ok(Self {
            eval_grid: result.eval_grid.clone(),
            fd,
            luiro,
            chosen,
            spread: samples.spread,
            mask,
        })
    }

    pub fn masked(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// Relative errors `|fd − luiro| / max(|fd|, floor)` over masked points.
    pub fn relative_errors(&self) -> Vec<f64> {
        (0..self.fd.len())
            .filter(|&i| self.mask[i])
            .map(|i| (self.fd[i] - self.luiro[i]).abs() / self.fd[i].abs().max(RATIO_FLOOR))
            .collect()
    }

    pub fn median_relative_error(&self) -> Option<f64> {
        median(self.relative_errors())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let rows = (0..self.fd.len()).map(|i| {
            vec![
                self.eval_grid[i],
                self.fd[i],
                self.luiro[i],
                self.spread[i],
                if self.mask[i] { 1.0 } else { 0.0 },
            ]
        });
        crate::csvio::write_rows(path, &["t", "fd", "luiro", "spread", "mask"], rows)
    }
}

fn ball_extent(g: &crate::maximal::GoodBallSet) -> f64 {
    let fold = |f: fn(&crate::maximal::GoodBall) -> f64| {
        let lo = g.balls.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = g.balls.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        if g.balls.is_empty() {
            0.0
        } else {
            hi - lo
        }
    };
    fold(|b| b.s).max(fold(|b| b.r))
}

pub fn median(mut v: Vec<f64>) -> Option<f64> {
    v.retain(|x| !x.is_nan());
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatioFlag {
    Ok,
    Skipped,
    Violation,
}

impl RatioFlag {
    fn as_str(self) -> &'static str {
        match self {
            RatioFlag::Ok => "ok",
            RatioFlag::Skipped => "skipped",
            RatioFlag::Violation => "violation",
        }
    }
}

/// Pointwise ratios `numerator / denominator` with an optional bound.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioReport {
    pub name: String,
    pub t: Vec<f64>,
    pub numerator: Vec<f64>,
    pub denominator: Vec<f64>,
    /// NaN where skipped.
    pub ratio: Vec<f64>,
    pub flag: Vec<RatioFlag>,
    pub bound: Option<f64>,
    /// Max over non-skipped points (0 when all are skipped).
    pub max: f64,
    pub median: f64,
    pub skipped: usize,
    pub violations: usize,
}

impl RatioReport {
    pub fn new(
        name: impl Into<String>,
        t: Vec<f64>,
        numerator: Vec<f64>,
        denominator: Vec<f64>,
        bound: Option<f64>,
    ) -> Self {
        let mut ratio = Vec::with_capacity(t.len());
        let mut flag = Vec::with_capacity(t.len());
        for (n, d) in numerator.iter().zip(&denominator) {
            if *d < RATIO_FLOOR {
                ratio.push(f64::NAN);
                flag.push(RatioFlag::Skipped);
                continue;
            }
            let r = n / d;
            ratio.push(r);
            flag.push(match bound {
                Some(b) if r > b => RatioFlag::Violation,
                _ => RatioFlag::Ok,
            });
        }
        let kept: Vec<f64> = ratio.iter().copied().filter(|r| !r.is_nan()).collect();
        Self {
            name: name.into(),
            max: kept.iter().copied().fold(0.0, f64::max),
            median: median(kept).unwrap_or(0.0),
            skipped: flag.iter().filter(|f| **f == RatioFlag::Skipped).count(),
            violations: flag.iter().filter(|f| **f == RatioFlag::Violation).count(),
            t,
            numerator,
            denominator,
            ratio,
            flag,
            bound,
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn passed(&self) -> bool {
        self.violations == 0 && self.max.is_finite()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let rows = (0..self.t.len()).map(|i| {
            vec![
                self.t[i].to_string(),
                self.numerator[i].to_string(),
                self.denominator[i].to_string(),
                self.ratio[i].to_string(),
                self.flag[i].as_str().to_string(),
            ]
        });
        crate::csvio::write_records(path, &["t", "numerator", "denominator", "ratio", "flag"], rows)
    }
}

impl fmt::Display for RatioReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: points={} max={:.6} median={:.6} skipped={} violations={}",
            self.name,
            self.len(),
            self.max,
            self.median,
            self.skipped,
            self.violations
        )
    }
}

/// `|a − b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_drift(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// `|∇M f| ≤ M(|∇f|)` at `β = 0`, non-centered, bound `1.05`.
pub fn check_kinnunen(f: &RadialProfile, eval_grid: &[f64]) -> Result<RatioReport> {
    let step = f.h();
    let m = maximal_profile_with_step(f, 0.0, VariantKind::Noncentered, eval_grid, step)?;
    let fd = fd_gradient(&m)?;
    let grad = RadialDensity::slopes(&f.weak_derivative().abs());
    let mg = maximal_density(&grad, &format!("{}-grad", f.content_hash()), 0.0, VariantKind::Noncentered, eval_grid, step)?;
    Ok(RatioReport::new(
        "kinnunen",
        eval_grid.to_vec(),
        fd.iter().map(|v| v.abs()).collect(),
        mg.values,
        Some(1.05),
    ))
}

/// `|∇M_β f| / M_{β−1} f` for `β ∈ [1, d)`, with the non-centered
/// `M_{β−1}` in the denominator for either variant.
pub fn check_ks(f: &RadialProfile, beta: f64, kind: VariantKind, eval_grid: &[f64]) -> Result<RatioReport> {
    if f.d() < 2 {
        return Err(Error::Refused(format!("the KS check needs d >= 2, got d = {}", f.d())));
    }
    if !(1.0..f.d() as f64).contains(&beta) {
        return Err(Error::Refused(format!(
            "the KS check needs beta in [1, {}), got {beta}; use the refined check below 1",
            f.d()
        )));
    }
    let m = maximal_profile_with_step(f, beta, kind, eval_grid, f.h())?;
    let fd = fd_gradient(&m)?;
    let lower = maximal_profile_with_step(f, beta - 1.0, VariantKind::Noncentered, eval_grid, f.h())?;
    Ok(RatioReport::new(
        format!("ks[{kind}, beta={beta}]"),
        eval_grid.to_vec(),
        fd.iter().map(|v| v.abs()).collect(),
        lower.values,
        None,
    ))
}

/// `|r^β ⨍_B ∇|f|| / (r^{β−1} ⨍_B |f|)` at the chosen good ball of every
/// masked point.
pub fn check_refined_ks(f: &RadialProfile, result: &MaximalResult) -> Result<RatioReport> {
    let pair = GradientPair::new(f, result)?;
    let mut t = Vec::new();
    let mut num = Vec::new();
    let mut den = Vec::new();
    for i in (0..pair.fd.len()).filter(|&i| pair.mask[i]) {
        let g = &result.good[i];
        if result.beta() == 0.0 && g.balls.iter().any(|b| b.r == 0.0) {
            continue;
        }
        let balls: Vec<_> = g.balls.iter().filter(|b| b.r > 0.0).collect();
        let stride = balls.len().div_ceil(MAX_LUIRO_BALLS).max(1);
        let ball = balls.iter().step_by(stride).nth(pair.chosen[i].unwrap()).unwrap();
        t.push(result.eval_grid[i]);
        num.push(pair.luiro[i].abs());
        den.push(ball.value / ball.r);
    }
    Ok(RatioReport::new(
        format!("refined_ks[beta={}]", result.beta()),
        t,
        num,
        den,
        None,
    ))
}

/// Inner good balls (`s + r ≤ t`): `|⨍_B ∇|f|| ≤ ⨍_B |∇f(y)| |y| / t`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerBallReport {
    pub ratios: RatioReport,
    /// Balls where the weighted mass exceeded the unweighted one.
    pub weight_violations: usize,
}

pub fn check_inner_ball(f: &RadialProfile, result: &MaximalResult) -> Result<InnerBallReport> {
    let ctx = CapKernelContext::new(f.d())?;
    let signed = RadialDensity::slopes(&f.modulus().weak_derivative());
    let slopes = f.weak_derivative();
    let mass = RadialDensity::slopes(&slopes.abs());
    let mut t_out = Vec::new();
    let mut num = Vec::new();
    let mut den = Vec::new();
    let mut weight_violations = 0;
    for g in &result.good {
        let t = g.t;
        if !(t > 0.0) {
            continue;
        }
        let weighted = RadialDensity::radius_weighted(&slopes, 1.0 / t);
        for b in g.balls.iter().filter(|b| b.r > 0.0 && b.s > 0.0) {
            if b.s + b.r > t + 1e-9 * (1.0 + t) {
                continue;
            }
            let lhs = signed.ball_integral(b.s, b.r, Kernel::Moment, &ctx).abs();
            let rhs = weighted.ball_integral(b.s, b.r, Kernel::Cap, &ctx);
            let plain = mass.ball_integral(b.s, b.r, Kernel::Cap, &ctx);
            if rhs > plain * (1.0 + 1e-9) + 1e-15 {
                weight_violations += 1;
            }
            t_out.push(t);
            num.push(lhs);
            den.push(rhs);
        }
    }
    Ok(InnerBallReport {
        ratios: RatioReport::new("inner_ball", t_out, num, den, Some(1.0 + 1e-6)),
        weight_violations,
    })
}

/// Tangency and one-sidedness of good balls at masked points.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryReport {
    pub checked_points: usize,
    pub checked_balls: usize,
    pub skipped_points: usize,
    pub tangency_violations: usize,
    pub side_violations: usize,
    pub max_tangency_defect: f64,
}

impl GeometryReport {
    pub fn violations(&self) -> usize {
        self.tangency_violations + self.side_violations
    }
}

impl fmt::Display for GeometryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ball_geometry: points={} balls={} skipped={} tangency_violations={} side_violations={} max_defect={:.3e}",
            self.checked_points,
            self.checked_balls,
            self.skipped_points,
            self.tangency_violations,
            self.side_violations,
            self.max_tangency_defect
        )
    }
}

/// Slack is two search steps. Centered runs are skipped entirely.
pub fn check_ball_geometry(result: &MaximalResult, pair: &GradientPair) -> GeometryReport {
    let n = result.good.len();
    if result.kind() == VariantKind::Centered {
        return GeometryReport {
            checked_points: 0,
            checked_balls: 0,
            skipped_points: n,
            tangency_violations: 0,
            side_violations: 0,
            max_tangency_defect: 0.0,
        };
    }
    let slack = 2.0 * result.step + 1e-12;
    let mut report = GeometryReport {
        checked_points: 0,
        checked_balls: 0,
        skipped_points: 0,
        tangency_violations: 0,
        side_violations: 0,
        max_tangency_defect: 0.0,
    };
    for (g, &masked) in result.good.iter().zip(&pair.mask) {
        if !masked {
            report.skipped_points += 1;
            continue;
        }
        report.checked_points += 1;
        let t = g.t;
        for b in &g.balls {
            report.checked_balls += 1;
            let defect = ((b.s - t).abs() - b.r).abs();
            report.max_tangency_defect = report.max_tangency_defect.max(defect);
            if defect > slack {
                report.tangency_violations += 1;
            }
            if !(b.s + b.r <= t + slack || b.s - b.r >= t - slack) {
                report.side_violations += 1;
            }
        }
    }
    report
}

fn check_positive(t: &[f64]) -> Result<()> {
    match t.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
        Some(x) => Err(Error::InvalidGrid(format!(
            "majorants are singular at the origin; got t = {x}"
        ))),
        None => Ok(()),
    }
}

/// `u(t) = dω_d ∫_t^∞ |(|f̃|)′(u)| / u du`.
pub fn compute_u(f: &RadialProfile, t: &[f64]) -> Result<Vec<f64>> {
    check_positive(t)?;
    let g = f.modulus().weak_derivative();
    let nodes = g.nodes();
    let slopes = g.slopes();
    let m = slopes.len();
    // suffix[k] = Σ_{j ≥ k} |s_j| ln(b_j / a_j), first segment excluded
    let mut suffix = vec![0.0; m + 1];
    for k in (1..m).rev() {
        suffix[k] = suffix[k + 1] + slopes[k].abs() * (nodes[k + 1] / nodes[k]).ln();
    }
    let c = sphere_measure(f.d());
    Ok(t.iter()
        .map(|&x| {
            if x >= nodes[m] {
                return 0.0;
            }
            let k = (nodes.partition_point(|&a| a <= x) - 1).min(m - 1);
            c * (slopes[k].abs() * (nodes[k + 1] / x).ln() + suffix[k + 1])
        })
        .collect())
}

/// `v(t) = dω_d t^{−d−1} ∫_0^t |f̃′(u)| u^d du`.
pub fn compute_v(f: &RadialProfile, t: &[f64]) -> Result<Vec<f64>> {
    check_positive(t)?;
    let g = f.weak_derivative();
    let d = f.d() as i32;
    let nodes = g.nodes();
    let slopes = g.slopes();
    let m = slopes.len();
    let piece = |k: usize, a: f64, b: f64| slopes[k].abs() * (b.powi(d + 1) - a.powi(d + 1)) / (d + 1) as f64;
    let mut prefix = vec![0.0; m + 1];
    for k in 0..m {
        prefix[k + 1] = prefix[k] + piece(k, nodes[k], nodes[k + 1]);
    }
    let c = sphere_measure(f.d());
    Ok(t.iter()
        .map(|&x| {
            let inner = if x >= nodes[m] {
                prefix[m]
            } else {
                let k = (nodes.partition_point(|&a| a <= x) - 1).min(m - 1);
                prefix[k] + piece(k, nodes[k], x)
            };
            c * inner / x.powi(d + 1)
        })
        .collect())
}

/// Numerical `‖u‖₁`, `‖v‖₁` against their closed forms `ω_d ‖∇|f|‖₁` and
/// `dω_d ‖∇f‖₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MajorantReport {
    pub u_l1: f64,
    pub u_expected: f64,
    pub v_l1: f64,
    pub v_expected: f64,
}

impl MajorantReport {
    pub fn u_error(&self) -> f64 {
        relative_error(self.u_l1, self.u_expected)
    }

    pub fn v_error(&self) -> f64 {
        relative_error(self.v_l1, self.v_expected)
    }
}

fn relative_error(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        got.abs()
    } else {
        (got - want).abs() / want.abs()
    }
}

/// Samples `u` and `v` on a grid `subdivisions` times finer than the
/// profile nodes and integrates `dω_d ∫ w(t) t^{d−1} dt` by trapezoid,
/// adding the closed-form tail of `v` beyond the support.
pub fn check_majorants(f: &RadialProfile, subdivisions: usize) -> Result<MajorantReport> {
    let d = f.d();
    let end = f.t_max();
    let step = f.h() / subdivisions.max(1) as f64;
    let t: Vec<f64> = uniform_grid(0.0, end, step).into_iter().skip(1).collect();
    let u = compute_u(f, &t)?;
    let v = compute_v(f, &t)?;
    let c = sphere_measure(d);
    let weight = |x: f64| x.powi(d as i32 - 1);
    let integrate = |w: &[f64]| {
        // [0, t_1] by the first sample, which carries the integrable
        // singularity of u at the origin well enough for d ≥ 2
        let mut acc = w[0] * t[0].powi(d as i32) / d as f64;
        for i in 1..t.len() {
            acc += 0.5 * (t[i] - t[i - 1]) * (w[i] * weight(t[i]) + w[i - 1] * weight(t[i - 1]));
        }
        c * acc
    };
    let last = *t.last().unwrap();
    // v(t) t^{d−1} = V t^{−2} beyond the last sample
    let v_tail = c * v.last().unwrap() * last.powi(d as i32 + 1) / last;
    let grad_abs = f.modulus().grad_l1();
    Ok(MajorantReport {
        u_l1: integrate(&u),
        u_expected: unit_ball_volume(d) * grad_abs,
        v_l1: integrate(&v) + v_tail,
        v_expected: sphere_measure(d) * f.grad_l1(),
    })
}

/// `|∇M_β f|^q ≤ C (‖∇|f|‖₁^{q−1}(u + v) + |∇M^I_β f|^q)` on an annulus.
#[derive(Debug, Clone, PartialEq)]
pub struct DominationReport {
    pub q: f64,
    pub annulus: (f64, f64),
    pub t: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    /// Smallest constant making the inequality hold at every point.
    pub c_fit: f64,
    /// The same constant on the twice refined grid.
    pub c_fit_refined: f64,
    pub drift: f64,
    /// Drift exceeded 25%.
    pub unstable: bool,
}

fn domination_at(f: &RadialProfile, beta: f64, a: f64, b: f64) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let h = f.h();
    let t = uniform_grid(a, b, h);
    let q = endpoint_exponent(f.d(), beta);
    let full = maximal_profile_with_step(f, beta, VariantKind::Noncentered, &t, h)?;
    let trunc = maximal_profile_with_step(f, beta, VariantKind::TruncatedQuarter, &t, h)?;
    let gf = fd_gradient(&full)?;
    let gt = fd_gradient(&trunc)?;
    let u = compute_u(f, &t)?;
    let v = compute_v(f, &t)?;
    let mass = f.modulus().grad_l1().powf(q - 1.0);
    let lhs: Vec<f64> = gf.iter().map(|g| g.abs().powf(q)).collect();
    let rhs: Vec<f64> = (0..t.len())
        .map(|i| mass * (u[i] + v[i]) + gt[i].abs().powf(q))
        .collect();
    Ok((t, lhs, rhs))
}

fn fit(lhs: &[f64], rhs: &[f64]) -> f64 {
    lhs.iter()
        .zip(rhs)
        .map(|(l, r)| {
            if *l <= RATIO_FLOOR {
                0.0
            } else if *r < RATIO_FLOOR {
                f64::INFINITY
            } else {
                l / r
            }
        })
        .fold(0.0, f64::max)
}

pub fn check_domination(f: &RadialProfile, beta: f64, annulus: (f64, f64)) -> Result<DominationReport> {
    let (a, b) = annulus;
    if !(a > 0.0 && b > a) {
        return Err(Error::InvalidParameter {
            name: "annulus",
            reason: format!("need 0 < a < b, got [{a}, {b}]"),
        });
    }
    let (t, lhs, rhs) = domination_at(f, beta, a, b)?;
    let (_, lhs2, rhs2) = domination_at(&f.refined(), beta, a, b)?;
    let c_fit = fit(&lhs, &rhs);
    let c_fit_refined = fit(&lhs2, &rhs2);
    let drift = relative_drift(c_fit, c_fit_refined);
    Ok(DominationReport {
        q: endpoint_exponent(f.d(), beta),
        annulus,
        t,
        lhs,
        rhs,
        c_fit,
        c_fit_refined,
        drift,
        unstable: !(drift <= 0.25),
    })
}
