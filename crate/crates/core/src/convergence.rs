//! Sequences `f_j → f` in `W^{1,1}` and the behaviour of `∇M_β f_j`.

use std::fmt;
use std::path::Path;

use rand::SeedableRng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::derivative::{fd_samples, relative_drift};
use crate::error::{Error, Result};
use crate::maximal::{maximal_1d, maximal_profile_with_step, uniform_grid, VariantKind};
use crate::radial::{endpoint_exponent, make_profile, sphere_measure, LineFunction, LineSpec, ProfileSpec, RadialProfile};

/// Seed of the 32 pointwise sample locations.
pub const SAMPLE_SEED: u64 = 0x5eed;
pub const SAMPLE_POINTS: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SequenceKind {
    /// Moving average over a window of `scale · ε_j`.
    Mollify { scale: f64 },
    /// Outward shift by `delta · ε_j`, holding `f̃(0)` on `[0, δ_j]`.
    Translate { delta: f64 },
    /// `f + ε_j g`.
    Amplitude { g: ProfileSpec },
    /// `f + ε_j η` with seeded node noise `η ∈ [−1, 1] max|f̃|`.
    NodeJitter { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSpec {
    #[serde(flatten)]
    pub kind: SequenceKind,
    /// `ε_j = rate^j`.
    #[serde(default = "default_rate")]
    pub rate: f64,
    pub j_max: usize,
}

fn default_rate() -> f64 {
    0.5
}

impl SequenceSpec {
    pub fn new(kind: SequenceKind, j_max: usize) -> Self {
        Self {
            kind,
            rate: default_rate(),
            j_max,
        }
    }

    pub fn eps(&self, j: usize) -> f64 {
        self.rate.powi(j as i32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub eps: Vec<f64>,
    pub profiles: Vec<RadialProfile>,
    pub w11_dist: Vec<f64>,
}

/// `f_1, .., f_{j_max}` with their `W^{1,1}` distances to `f`, which must
/// strictly decrease (or vanish) and stay within `4 ε_j / ε_1` times the
/// first distance.
pub fn make_sequence(f: &RadialProfile, spec: &SequenceSpec) -> Result<Sequence> {
    if !(spec.rate > 0.0 && spec.rate < 1.0) {
        return Err(Error::InvalidParameter {
            name: "rate",
            reason: format!("rate {} must lie in (0, 1)", spec.rate),
        });
    }
    let eps: Vec<f64> = (1..=spec.j_max).map(|j| spec.eps(j)).collect();
    let profiles = match &spec.kind {
        SequenceKind::Amplitude { g } => {
            let g = make_profile(g, &f.grid())?;
            eps.iter().map(|e| f.add_scaled(&g, *e)).collect::<Result<Vec<_>>>()?
        }
        SequenceKind::Mollify { scale } => {
            positive("scale", *scale)?;
            eps.iter().map(|e| moving_average(f, scale * e)).collect::<Result<Vec<_>>>()?
        }
        SequenceKind::Translate { delta } => {
            positive("delta", *delta)?;
            eps.iter().map(|e| translate(f, delta * e)).collect::<Result<Vec<_>>>()?
        }
        SequenceKind::NodeJitter { seed } => {
            let eta = jitter(f, *seed)?;
            eps.iter().map(|e| f.add_scaled(&eta, *e)).collect::<Result<Vec<_>>>()?
        }
    };
    let w11_dist = profiles
        .iter()
        .map(|p| p.sub(f).map(|d| d.w11_norm()))
        .collect::<Result<Vec<_>>>()?;
    for j in 1..w11_dist.len() {
        let (prev, next) = (w11_dist[j - 1], w11_dist[j]);
        if prev > 0.0 && next >= prev {
            return Err(Error::NonDecreasingSequence { j: j + 1, prev, next });
        }
        if next > 4.0 * eps[j] / eps[0] * w11_dist[0] * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter {
                name: "rate",
                reason: format!("distance {next} at j = {} decays slower than the prescribed rate", j + 1),
            });
        }
    }
    Ok(Sequence {
        eps,
        profiles,
        w11_dist,
    })
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("{v} must be positive"),
        })
    }
}

/// `∫_0^x f̃` for `x ≥ 0`, exact for the piecewise-linear profile.
fn primitive(f: &RadialProfile) -> impl Fn(f64) -> f64 + '_ {
    let nodes = f.nodes();
    let vals = f.values();
    let mut acc = vec![0.0; nodes.len()];
    for i in 1..nodes.len() {
        acc[i] = acc[i - 1] + 0.5 * (vals[i] + vals[i - 1]) * (nodes[i] - nodes[i - 1]);
    }
    move |x: f64| {
        let last = nodes.len() - 1;
        if x >= nodes[last] {
            return acc[last];
        }
        let k = nodes.partition_point(|&a| a <= x).max(1) - 1;
        let w = x - nodes[k];
        let slope = (vals[k + 1] - vals[k]) / (nodes[k + 1] - nodes[k]);
        acc[k] + vals[k] * w + 0.5 * slope * w * w
    }
}

/// Average of the even extension of `f̃` over `[t − w/2, t + w/2]`,
/// sampled at the nodes of `f`.
pub fn moving_average(f: &RadialProfile, width: f64) -> Result<RadialProfile> {
    let half = 0.5 * width;
    if f.support_end() + half >= f.t_max() {
        return Err(Error::InvalidParameter {
            name: "scale",
            reason: format!("window {width} pushes the support past t_max = {}", f.t_max()),
        });
    }
    let big_f = primitive(f);
    let values = f
        .nodes()
        .iter()
        .map(|&t| {
            let (a, b) = (t - half, t + half);
            let mass = if a >= 0.0 { big_f(b) - big_f(a) } else { big_f(b) + big_f(-a) };
            mass / width
        })
        .collect();
    RadialProfile::new(f.d(), f.h(), f.nodes().to_vec(), values)
}

/// `f̃(max(t − δ, 0))` on the union of the original and shifted nodes.
pub fn translate(f: &RadialProfile, delta: f64) -> Result<RadialProfile> {
    if f.support_end() + delta >= f.t_max() {
        return Err(Error::InvalidParameter {
            name: "delta",
            reason: format!("shift {delta} pushes the support past t_max = {}", f.t_max()),
        });
    }
    let t_max = f.t_max();
    let mut nodes: Vec<f64> = f
        .nodes()
        .iter()
        .copied()
        .chain(f.nodes().iter().map(|t| t + delta).filter(|&t| t < t_max))
        .collect();
    nodes.sort_by(f64::total_cmp);
    nodes.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * t_max);
    let values = nodes.iter().map(|&t| f.eval((t - delta).max(0.0))).collect();
    RadialProfile::new(f.d(), f.h(), nodes, values)
}

fn jitter(f: &RadialProfile, seed: u64) -> Result<RadialProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp = f.max_abs().max(f64::MIN_POSITIVE);
    let n = f.nodes().len();
    let values = (0..n)
        .map(|i| if i + 1 == n { 0.0 } else { amp * rng.random_range(-1.0..=1.0) })
        .collect();
    RadialProfile::new(f.d(), f.h(), f.nodes().to_vec(), values)
}

/// Evaluation window and sampling choices shared by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabOptions {
    /// Right end of the evaluation window `[0, eval_max]`; every `L^q`
    /// norm below is taken over this window.
    pub eval_max: f64,
    pub step: f64,
    /// `K` in the tail mass beyond `3K`.
    pub tail_radius: f64,
    pub sample_seed: u64,
}

impl LabOptions {
    pub fn for_profile(f: &RadialProfile) -> Self {
        Self {
            eval_max: f.t_max(),
            step: f.h(),
            tail_radius: f.t_max() / 6.0,
            sample_seed: SAMPLE_SEED,
        }
    }

    pub fn eval_grid(&self) -> Vec<f64> {
        uniform_grid(0.0, self.eval_max, self.step)
    }
}

/// `dω_d ∫ w(t) t^{d−1} dt` by trapezoid over `t[start..]`.
fn radial_integral(d: usize, t: &[f64], w: &[f64], start: usize) -> f64 {
    let p = d as i32 - 1;
    let mut acc = 0.0;
    for i in start.max(1)..t.len() {
        if i == start {
            continue;
        }
        acc += 0.5 * (t[i] - t[i - 1]) * (w[i] * t[i].powi(p) + w[i - 1] * t[i - 1].powi(p));
    }
    sphere_measure(d) * acc
}

fn lq_power(d: usize, t: &[f64], g: &[f64], q: f64, start: usize) -> f64 {
    let w: Vec<f64> = g.iter().map(|v| v.abs().powf(q)).collect();
    radial_integral(d, t, &w, start)
}

struct Run {
    values: Vec<f64>,
    grad: Vec<f64>,
}

fn run_one(f: &RadialProfile, beta: f64, kind: VariantKind, opts: &LabOptions) -> Result<Run> {
    let t = opts.eval_grid();
    let m = maximal_profile_with_step(f, beta, kind, &t, opts.step)?;
    let grad = fd_samples(&t, &m.values)?;
    Ok(Run { values: m.values, grad })
}

fn sample_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool = n.saturating_sub(2);
    let mut idx: Vec<usize> = rand::seq::index::sample(&mut rng, pool, SAMPLE_POINTS.min(pool))
        .into_iter()
        .map(|i| i + 1)
        .collect();
    idx.sort_unstable();
    idx
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub j: usize,
    pub eps: f64,
    pub w11_dist: f64,
    pub lq_grad_dist: f64,
    pub bl_integral: f64,
    pub sup_dist: f64,
    pub tail_mass: f64,
    pub modulus_w11_dist: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub d: usize,
    pub beta: f64,
    pub q: f64,
    pub kind: VariantKind,
    pub options: LabOptions,
    pub rows: Vec<ConvergenceRow>,
    /// `‖∇M_β f‖_{L^q}` over the window.
    pub base_grad_lq: f64,
    /// `∫ |∇M_β f|^q` over the window.
    pub base_bl: f64,
    pub sample_t: Vec<f64>,
    /// Per `j`, `|M_β f_j − M_β f|` at the sample points.
    pub value_gaps: Vec<Vec<f64>>,
    /// Per `j`, `|∇M_β f_j − ∇M_β f|` at the sample points.
    pub grad_gaps: Vec<Vec<f64>>,
    pub value_scale: f64,
    pub grad_scale: f64,
    pub decreasing: bool,
    pub converges: bool,
}

impl ConvergenceReport {
    pub fn final_fraction(&self) -> f64 {
        match self.rows.last() {
            Some(r) if self.base_grad_lq > 0.0 => r.lq_grad_dist / self.base_grad_lq,
            Some(r) => r.lq_grad_dist,
            None => 0.0,
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let rows = self.rows.iter().map(|r| {
            vec![
                r.j as f64,
                r.w11_dist,
                r.lq_grad_dist,
                r.bl_integral,
                r.sup_dist,
                r.tail_mass,
            ]
        });
        crate::csvio::write_rows(
            path,
            &["j", "w11_dist", "lq_grad_dist", "bl_integral", "sup_dist", "tail_mass"],
            rows,
        )
    }

    /// One row per `(j, metric)`.
    pub fn write_long_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = Vec::new();
        for r in &self.rows {
            for (name, v) in [
                ("eps", r.eps),
                ("w11_dist", r.w11_dist),
                ("lq_grad_dist", r.lq_grad_dist),
                ("bl_integral", r.bl_integral),
                ("sup_dist", r.sup_dist),
                ("tail_mass", r.tail_mass),
                ("modulus_w11_dist", r.modulus_w11_dist),
            ] {
                out.push(vec![r.j.to_string(), name.to_string(), v.to_string()]);
            }
        }
        crate::csvio::write_records(path, &["j", "metric", "value"], out)
    }
}

impl fmt::Display for ConvergenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "converge[{}, d={}, beta={}, q={:.4}]: j_max={} final/base={:.4} decreasing={} verdict={}",
            self.kind,
            self.d,
            self.beta,
            self.q,
            self.rows.len(),
            self.final_fraction(),
            self.decreasing,
            if self.converges { "converges" } else { "flagged" }
        )
    }
}

/// Strictly decreasing, except that a run of exact zeros counts as settled.
fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0] || (w[0] == 0.0 && w[1] == 0.0))
}

pub fn run_convergence(
    f: &RadialProfile,
    spec: &SequenceSpec,
    beta: f64,
    kind: VariantKind,
    opts: &LabOptions,
) -> Result<ConvergenceReport> {
    let seq = make_sequence(f, spec)?;
    let t = opts.eval_grid();
    let d = f.d();
    let q = endpoint_exponent(d, beta);
    let base = run_one(f, beta, kind, opts)?;
    let runs = seq
        .profiles
        .par_iter()
        .map(|p| run_one(p, beta, kind, opts))
        .collect::<Result<Vec<_>>>()?;
    let tail_start = t.partition_point(|&x| x < 3.0 * opts.tail_radius);
    let samples = sample_indices(t.len(), opts.sample_seed);
    let abs_f = f.modulus();
    let mut rows = Vec::with_capacity(runs.len());
    let mut value_gaps = Vec::with_capacity(runs.len());
    let mut grad_gaps = Vec::with_capacity(runs.len());
    for (j, run) in runs.iter().enumerate() {
        let diff: Vec<f64> = run.grad.iter().zip(&base.grad).map(|(a, b)| a - b).collect();
        let sup_dist = run
            .values
            .iter()
            .zip(&base.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        rows.push(ConvergenceRow {
            j: j + 1,
            eps: seq.eps[j],
            w11_dist: seq.w11_dist[j],
            lq_grad_dist: lq_power(d, &t, &diff, q, 0).powf(1.0 / q),
            bl_integral: lq_power(d, &t, &run.grad, q, 0),
            sup_dist,
            tail_mass: lq_power(d, &t, &diff, q, tail_start),
            modulus_w11_dist: seq.profiles[j].modulus().sub(&abs_f)?.w11_norm(),
        });
        value_gaps.push(samples.iter().map(|&i| (run.values[i] - base.values[i]).abs()).collect());
        grad_gaps.push(samples.iter().map(|&i| diff[i].abs()).collect());
    }
    let base_bl = lq_power(d, &t, &base.grad, q, 0);
    let base_grad_lq = base_bl.powf(1.0 / q);
    let lq: Vec<f64> = rows.iter().map(|r| r.lq_grad_dist).collect();
    let decreasing = strictly_decreasing(&lq);
    let final_ok = match lq.last() {
        Some(last) => *last <= 0.05 * base_grad_lq,
        None => true,
    };
    Ok(ConvergenceReport {
        d,
        beta,
        q,
        kind,
        options: *opts,
        rows,
        base_grad_lq,
        base_bl,
        sample_t: samples.iter().map(|&i| t[i]).collect(),
        value_gaps,
        grad_gaps,
        value_scale: base.values.iter().map(|v| v.abs()).fold(0.0, f64::max),
        grad_scale: base.grad.iter().map(|v| v.abs()).fold(0.0, f64::max),
        decreasing,
        converges: decreasing && final_ok,
    })
}

/// Two routes to `∇M_β f_j → ∇M_β f` in `L^q`: the norm itself, and
/// convergence of `∫|∇M_β f_j|^q` together with pointwise convergence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrezisLiebVerdict {
    pub bl_converges: bool,
    /// Share of sample points where both the value and the gradient gaps
    /// end below 5% of their scales.
    pub pointwise_fraction: f64,
    pub pointwise_converges: bool,
    pub lq_converges: bool,
    pub consistent: bool,
}

impl fmt::Display for BrezisLiebVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "brezis_lieb: integrals={} pointwise={:.3} lq={} verdict={}",
            self.bl_converges,
            self.pointwise_fraction,
            self.lq_converges,
            if self.consistent { "consistent" } else { "flagged" }
        )
    }
}

pub fn brezis_lieb_diagnostic(report: &ConvergenceReport) -> BrezisLiebVerdict {
    let bl_converges = match report.rows.last() {
        None => true,
        Some(r) => (r.bl_integral - report.base_bl).abs() <= 0.05 * report.base_bl.max(1e-300),
    };
    let (value_gap, grad_gap) = match (report.value_gaps.last(), report.grad_gaps.last()) {
        (Some(v), Some(g)) => (v.clone(), g.clone()),
        _ => (Vec::new(), Vec::new()),
    };
    let n = value_gap.len();
    let good = (0..n)
        .filter(|&i| {
            value_gap[i] <= 0.05 * report.value_scale && grad_gap[i] <= 0.05 * report.grad_scale
        })
        .count();
    let pointwise_fraction = if n == 0 { 1.0 } else { good as f64 / n as f64 };
    let pointwise_converges = pointwise_fraction >= 0.95;
    let lq_converges = report.converges;
    BrezisLiebVerdict {
        bl_converges,
        pointwise_fraction,
        pointwise_converges,
        lq_converges,
        consistent: (bl_converges && pointwise_converges) == lq_converges,
    }
}

/// `∫_{t > 3K} |∇M_β f_j − ∇M_β f|^q` over a family of `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailReport {
    pub k_radii: Vec<f64>,
    /// `mass[k][j]`.
    pub mass: Vec<Vec<f64>>,
    /// `∫_{t > 3K} |∇M_β f|^q` per `K`.
    pub base_tail: Vec<f64>,
    /// `∫ |∇M_β f|^q` over the window.
    pub base_total: f64,
    pub eps: f64,
    /// First `j` (1-based) from which every tail mass stays below `eps`.
    pub j_eps: Option<usize>,
    pub monotone_in_k: bool,
    pub uniform_after_j_eps: bool,
}

impl fmt::Display for TailReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "tail: radii={} eps={:.3e} j_eps={} monotone_in_K={} uniform={}",
            self.k_radii.len(),
            self.eps,
            self.j_eps.map_or("none".to_string(), |j| j.to_string()),
            self.monotone_in_k,
            self.uniform_after_j_eps
        )
    }
}

pub fn tail_smallness(
    f: &RadialProfile,
    spec: &SequenceSpec,
    beta: f64,
    kind: VariantKind,
    k_radii: &[f64],
    eps: f64,
    opts: &LabOptions,
) -> Result<TailReport> {
    if k_radii.is_empty() || k_radii.windows(2).any(|w| !(w[1] > w[0])) || k_radii[0] <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "k_radii",
            reason: "radii must be positive and strictly increasing".into(),
        });
    }
    let seq = make_sequence(f, spec)?;
    let t = opts.eval_grid();
    let d = f.d();
    let q = endpoint_exponent(d, beta);
    let base = run_one(f, beta, kind, opts)?;
    let runs = seq
        .profiles
        .par_iter()
        .map(|p| run_one(p, beta, kind, opts))
        .collect::<Result<Vec<_>>>()?;
    let starts: Vec<usize> = k_radii.iter().map(|k| t.partition_point(|&x| x < 3.0 * k)).collect();
    let mass: Vec<Vec<f64>> = starts
        .iter()
        .map(|&s| {
            runs.iter()
                .map(|run| {
                    let diff: Vec<f64> = run.grad.iter().zip(&base.grad).map(|(a, b)| a - b).collect();
                    lq_power(d, &t, &diff, q, s)
                })
                .collect()
        })
        .collect();
    let base_tail = starts.iter().map(|&s| lq_power(d, &t, &base.grad, q, s)).collect();
    let monotone_in_k = (0..runs.len()).all(|j| mass.windows(2).all(|w| w[1][j] <= w[0][j]));
    let worst: Vec<f64> = (0..runs.len())
        .map(|j| mass.iter().map(|m| m[j]).fold(0.0, f64::max))
        .collect();
    let j_eps = (0..worst.len())
        .find(|&j| worst[j..].iter().all(|m| *m < eps))
        .map(|j| j + 1);
    Ok(TailReport {
        k_radii: k_radii.to_vec(),
        mass,
        base_tail,
        base_total: lq_power(d, &t, &base.grad, q, 0),
        eps,
        j_eps,
        monotone_in_k,
        uniform_after_j_eps: j_eps.is_some(),
    })
}

/// `|M_β f_j − M_β f| ≤ ‖f_j − f‖_{L^{d/β}} + tol` pointwise, `β ∈ (d−1, d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformReport {
    pub beta: f64,
    pub sup_dist: Vec<f64>,
    pub bound: Vec<f64>,
    pub violations: usize,
    /// Largest `|M_β f_j − M_β f| / bound` over all `j` and points.
    pub max_ratio: f64,
}

impl fmt::Display for UniformReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "uniform[beta={}]: j_max={} max_ratio={:.4} violations={}",
            self.beta,
            self.sup_dist.len(),
            self.max_ratio,
            self.violations
        )
    }
}

pub fn uniform_convergence_check(
    f: &RadialProfile,
    spec: &SequenceSpec,
    beta: f64,
    opts: &LabOptions,
) -> Result<UniformReport> {
    let d = f.d() as f64;
    if !(beta > d - 1.0 && beta < d) {
        return Err(Error::Refused(format!(
            "the uniform bound needs beta in ({}, {}), got {beta}",
            d - 1.0,
            d
        )));
    }
    let seq = make_sequence(f, spec)?;
    let base = run_one(f, beta, VariantKind::Noncentered, opts)?;
    let runs = seq
        .profiles
        .par_iter()
        .map(|p| run_one(p, beta, VariantKind::Noncentered, opts))
        .collect::<Result<Vec<_>>>()?;
    let p = d / beta;
    let mut sup_dist = Vec::new();
    let mut bound = Vec::new();
    let mut violations = 0;
    let mut max_ratio = 0.0_f64;
    for (run, fj) in runs.iter().zip(&seq.profiles) {
        let norm = fj.sub(f)?.lp_norm(p)?;
        let tol = 1e-6 + 1e-2 * norm;
        let mut sup = 0.0_f64;
        for (a, b) in run.values.iter().zip(&base.values) {
            let gap = (a - b).abs();
            sup = sup.max(gap);
            if gap > norm + tol {
                violations += 1;
            }
            if norm > 0.0 {
                max_ratio = max_ratio.max(gap / norm);
            }
        }
        sup_dist.push(sup);
        bound.push(norm);
    }
    Ok(UniformReport {
        beta,
        sup_dist,
        bound,
        violations,
        max_ratio,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRow {
    pub id: String,
    pub ratio: f64,
    pub ratio_refined: f64,
    pub drift: f64,
}

/// `‖(M^c_β f)′‖_{L^q} / ‖f′‖_{L¹}` over a corpus of line functions. This
/// probes an open conjecture and carries no pass/fail meaning.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub beta: f64,
    pub q: f64,
    pub rows: Vec<ProbeRow>,
    pub max_ratio: f64,
    pub argmax_id: String,
    pub max_drift: f64,
}

impl ProbeReport {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let rows = self.rows.iter().map(|r| {
            vec![
                r.id.clone(),
                r.ratio.to_string(),
                r.ratio_refined.to_string(),
                r.drift.to_string(),
            ]
        });
        crate::csvio::write_records(path, &["id", "ratio", "ratio_refined", "drift"], rows)
    }
}

impl fmt::Display for ProbeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "conjecture probe (report only) [beta={}, q={:.4}]: functions={} max_ratio={:.6} at {} max_drift={:.4}",
            self.beta,
            self.q,
            self.rows.len(),
            self.max_ratio,
            self.argmax_id,
            self.max_drift
        )
    }
}

/// `‖(M^c_β f)′‖_{L^q}` over the domain of `f`.
pub fn centered_derivative_lq(f: &LineFunction, beta: f64) -> Result<f64> {
    let q = 1.0 / (1.0 - beta);
    let m = maximal_1d(f, beta, true)?;
    let g = fd_samples(&m.eval_grid, &m.values)?;
    let h = f.h();
    let w: Vec<f64> = g.iter().map(|v| v.abs().powf(q)).collect();
    let integral: f64 = w.windows(2).map(|p| 0.5 * h * (p[0] + p[1])).sum();
    Ok(integral.powf(1.0 / q))
}

pub fn conjecture_probe_1d(corpus: &[(String, LineFunction)], beta: f64) -> Result<ProbeReport> {
    if corpus.is_empty() {
        return Err(Error::InvalidParameter {
            name: "corpus",
            reason: "corpus is empty".into(),
        });
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::BetaOutOfRange { beta, upper: 1.0 });
    }
    let rows = corpus
        .par_iter()
        .map(|(id, f)| {
            let grad = f.derivative_l1();
            let ratio_of = |g: &LineFunction| -> Result<f64> {
                Ok(if grad > 0.0 { centered_derivative_lq(g, beta)? / grad } else { 0.0 })
            };
            let ratio = ratio_of(f)?;
            let ratio_refined = ratio_of(&f.refined())?;
            Ok(ProbeRow {
                id: id.clone(),
                ratio,
                ratio_refined,
                drift: relative_drift(ratio, ratio_refined),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (argmax, max_ratio) = rows
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, r)| if r.ratio > acc.1 { (i, r.ratio) } else { acc });
    Ok(ProbeReport {
        beta,
        q: 1.0 / (1.0 - beta),
        argmax_id: rows[argmax].id.clone(),
        max_drift: rows.iter().map(|r| r.drift).fold(0.0, f64::max),
        max_ratio,
        rows,
    })
}

/// `count` seeded random line functions on `[x_min, x_max]`, knots on
/// `[-1, 1]`.
pub fn random_line_corpus(
    count: usize,
    first_seed: u64,
    x_min: f64,
    x_max: f64,
    h: f64,
) -> Result<Vec<(String, LineFunction)>> {
    (0..count as u64)
        .map(|i| {
            let seed = first_seed + i;
            let spec = LineSpec::RandomPl {
                seed,
                n_knots: 8,
                left: -1.0,
                right: 1.0,
            };
            Ok((format!("random_pl#{seed}"), LineFunction::from_spec(&spec, x_min, x_max, h)?))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulusReport {
    pub w11_dist: Vec<f64>,
    pub modulus_w11_dist: Vec<f64>,
    /// Largest `modulus_w11_dist / w11_dist`.
    pub max_ratio: f64,
    pub converges: bool,
}

impl fmt::Display for ModulusReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "modulus: j_max={} max_ratio={:.4} verdict={}",
            self.w11_dist.len(),
            self.max_ratio,
            if self.converges { "converges" } else { "flagged" }
        )
    }
}

/// `‖|f_j| − |f|‖_{W^{1,1}}` must shrink: overall decrease, and no step
/// growing by more than a factor 2.
pub fn modulus_convergence_check(f: &RadialProfile, spec: &SequenceSpec) -> Result<ModulusReport> {
    let seq = make_sequence(f, spec)?;
    let abs_f = f.modulus();
    let modulus_w11_dist = seq
        .profiles
        .iter()
        .map(|p| p.modulus().sub(&abs_f).map(|d| d.w11_norm()))
        .collect::<Result<Vec<_>>>()?;
    let max_ratio = modulus_w11_dist
        .iter()
        .zip(&seq.w11_dist)
        .filter(|(_, w)| **w > 0.0)
        .map(|(m, w)| m / w)
        .fold(0.0, f64::max);
    let within_band = modulus_w11_dist.windows(2).all(|w| w[1] <= 2.0 * w[0]);
    let shrinks = match (modulus_w11_dist.first(), modulus_w11_dist.last()) {
        (Some(a), Some(b)) => modulus_w11_dist.len() == 1 || b < a || (*a == 0.0 && *b == 0.0),
        _ => true,
    };
    Ok(ModulusReport {
        w11_dist: seq.w11_dist,
        modulus_w11_dist,
        max_ratio,
        converges: within_band && shrinks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::RadialGrid;
    use approx::assert_relative_eq;

    fn tent(d: usize, h: f64, t_max: f64) -> RadialProfile {
        make_profile(&ProfileSpec::Tent { a: 1.0 }, &RadialGrid::new(d, h, t_max).unwrap()).unwrap()
    }

    #[test]
    fn amplitude_distances_are_linear() {
        let f = tent(2, 0.05, 2.0);
        let g = ProfileSpec::Tent { a: 0.5 };
        let spec = SequenceSpec::new(SequenceKind::Amplitude { g: g.clone() }, 5);
        let seq = make_sequence(&f, &spec).unwrap();
        let gw = make_profile(&g, &f.grid()).unwrap().w11_norm();
        for (j, d) in seq.w11_dist.iter().enumerate() {
            assert_relative_eq!(*d, 0.5_f64.powi(j as i32 + 1) * gw, max_relative = 1e-12);
        }
    }

    #[test]
    fn empty_sequence() {
        let f = tent(2, 0.05, 2.0);
        let spec = SequenceSpec::new(SequenceKind::Translate { delta: 0.2 }, 0);
        assert!(make_sequence(&f, &spec).unwrap().profiles.is_empty());
    }

    #[test]
    fn translation_and_mollification_shrink() {
        let f = tent(2, 0.02, 2.0);
        for kind in [
            SequenceKind::Translate { delta: 0.2 },
            SequenceKind::Mollify { scale: 0.2 },
            SequenceKind::NodeJitter { seed: 3 },
        ] {
            let seq = make_sequence(&f, &SequenceSpec::new(kind.clone(), 6)).unwrap();
            assert!(seq.w11_dist.windows(2).all(|w| w[1] < w[0]), "{kind:?}: {:?}", seq.w11_dist);
        }
    }

    #[test]
    fn translate_holds_the_origin_value() {
        let f = tent(2, 0.1, 2.0);
        let g = translate(&f, 0.25).unwrap();
        assert_eq!(g.eval(0.2), 1.0);
        assert_relative_eq!(g.eval(0.75), 0.5, epsilon = 1e-12);
        assert!(translate(&f, 1.5).is_err());
    }

    #[test]
    fn moving_average_of_linear_piece_is_exact() {
        let f = tent(1, 0.1, 2.0);
        let g = moving_average(&f, 0.2).unwrap();
        // inside (0.1, 0.9) the tent is linear, so the average is the value
        assert_relative_eq!(g.eval(0.5), 0.5, epsilon = 1e-12);
        // at 0 the even extension averages the peak: 1 − w/4
        assert_relative_eq!(g.eval(0.0), 0.95, epsilon = 1e-12);
    }

    #[test]
    fn identical_sequence_has_zero_distances() {
        let f = tent(2, 0.05, 2.0);
        let spec = SequenceSpec::new(SequenceKind::Amplitude { g: "bump_sum()".parse().unwrap() }, 3);
        let opts = LabOptions::for_profile(&f);
        let rep = run_convergence(&f, &spec, 0.5, VariantKind::Noncentered, &opts).unwrap();
        assert!(rep.rows.iter().all(|r| r.lq_grad_dist == 0.0 && r.sup_dist == 0.0));
        assert!(rep.converges);
        assert!(brezis_lieb_diagnostic(&rep).consistent);
    }

    #[test]
    fn uniform_check_refuses_low_beta() {
        let f = tent(2, 0.05, 2.0);
        let spec = SequenceSpec::new(SequenceKind::Translate { delta: 0.2 }, 2);
        assert!(matches!(
            uniform_convergence_check(&f, &spec, 0.5, &LabOptions::for_profile(&f)),
            Err(Error::Refused(_))
        ));
    }

    #[test]
    fn probe_rejects_empty_corpus() {
        assert!(conjecture_probe_1d(&[], 0.5).is_err());
    }

    #[test]
    fn probe_is_scale_invariant() {
        let corpus = random_line_corpus(2, 1, -2.0, 2.0, 0.02).unwrap();
        let scaled: Vec<_> = corpus.iter().map(|(id, f)| (id.clone(), f.scaled(2.0))).collect();
        let a = conjecture_probe_1d(&corpus, 0.5).unwrap();
        let b = conjecture_probe_1d(&scaled, 0.5).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_relative_eq!(x.ratio, y.ratio, max_relative = 1e-12);
        }
    }

    #[test]
    fn modulus_of_nonnegative_sequence_matches() {
        let f = tent(2, 0.05, 2.0);
        let spec = SequenceSpec::new(SequenceKind::Amplitude { g: ProfileSpec::Tent { a: 0.5 } }, 4);
        let rep = modulus_convergence_check(&f, &spec).unwrap();
        for (a, b) in rep.w11_dist.iter().zip(&rep.modulus_w11_dist) {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
        assert!(rep.converges);
    }

    #[test]
    fn sample_points_are_deterministic() {
        assert_eq!(sample_indices(200, 1), sample_indices(200, 1));
        assert_eq!(sample_indices(200, 1).len(), SAMPLE_POINTS);
        assert!(sample_indices(200, 1).iter().all(|&i| i >= 1 && i <= 198));
    }
}
