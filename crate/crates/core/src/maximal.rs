//! Fractional maximal operators and their discrete good-ball families.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_beta, AverageTable, CapKernelContext, Kernel, RadialDensity};
use crate::radial::{unit_ball_volume, LineFunction, RadialProfile};

/// Relative tolerance defining near-argmax cells.
pub const GOOD_BALL_TOL: f64 = 1e-6;

/// Cap on the number of good intervals stored per point by [`maximal_1d`]
/// in the non-centered case; `r_min`/`r_max` still cover the full set.
pub const MAX_STORED_INTERVALS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantKind {
    Noncentered,
    Centered,
    TruncatedQuarter,
    InnerOnly,
    OuterOnly,
}

impl VariantKind {
    pub const ALL: [VariantKind; 5] = [
        VariantKind::Noncentered,
        VariantKind::Centered,
        VariantKind::TruncatedQuarter,
        VariantKind::InnerOnly,
        VariantKind::OuterOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VariantKind::Noncentered => "noncentered",
            VariantKind::Centered => "centered",
            VariantKind::TruncatedQuarter => "truncated_quarter",
            VariantKind::InnerOnly => "inner_only",
            VariantKind::OuterOnly => "outer_only",
        }
    }

    /// Whether the ball with center norm `s` and radius `r` is admissible
    /// at `t`, up to a floating tolerance scaled by the magnitudes involved.
    pub fn admits(self, t: f64, s: f64, r: f64) -> bool {
        let tol = 1e-9 * (1.0 + t + s + r);
        let touches = (s - t).abs() <= r + tol;
        match self {
            VariantKind::Noncentered => touches,
            VariantKind::Centered => (s - t).abs() <= tol,
            VariantKind::TruncatedQuarter => touches && r <= 0.25 * t + tol,
            VariantKind::InnerOnly => touches && s + r <= t + tol,
            VariantKind::OuterOnly => touches && s - r >= t - tol,
        }
    }

    /// Interval of center norms worth scanning at radius `r`.
    fn s_window(self, t: f64, r: f64) -> (f64, f64) {
        let tol = 1e-9 * (1.0 + t + r);
        match self {
            VariantKind::Noncentered | VariantKind::TruncatedQuarter => (t - r - tol, t + r + tol),
            VariantKind::Centered => (t - tol, t + tol),
            VariantKind::InnerOnly => (t - r - tol, t - r + tol),
            VariantKind::OuterOnly => (t + r - tol, t + r + tol),
        }
    }

    /// Radius below which the supremum is attained, when one is known.
    fn radius_cap(self, t: f64, support_end: f64) -> Option<f64> {
        let full = t.max(support_end);
        match self {
            VariantKind::Noncentered => Some(full),
            VariantKind::Centered => Some(t + support_end),
            VariantKind::TruncatedQuarter => Some(full.min(0.25 * t)),
            VariantKind::InnerOnly => Some(t),
            VariantKind::OuterOnly => None,
        }
    }
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VariantKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        VariantKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| Error::InvalidParameter {
                name: "variant",
                reason: format!(
                    "unknown variant `{s}` (expected one of noncentered, centered, truncated_quarter, inner_only, outer_only)"
                ),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariantSpec {
    pub kind: VariantKind,
    pub beta: f64,
}

impl VariantSpec {
    pub fn new(kind: VariantKind, beta: f64, d: usize) -> Result<Self> {
        check_beta(beta, d)?;
        Ok(Self { kind, beta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoodBall {
    pub s: f64,
    pub r: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoodBallSet {
    pub t: f64,
    pub value: f64,
    /// Near-argmax cells in reporting order (`s` ascending, then `r`).
    pub balls: Vec<GoodBall>,
    pub r_min: f64,
    pub r_max: f64,
}

impl GoodBallSet {
    fn from_candidates(t: f64, mut cands: Vec<GoodBall>) -> Self {
        let value = cands.iter().fold(0.0_f64, |m, b| m.max(b.value));
        if value <= 0.0 {
            return Self {
                t,
                value: 0.0,
                balls: Vec::new(),
                r_min: f64::NAN,
                r_max: f64::NAN,
            };
        }
        let floor = (1.0 - GOOD_BALL_TOL) * value;
        cands.retain(|b| b.value >= floor);
        cands.sort_by(|a, b| a.s.total_cmp(&b.s).then(a.r.total_cmp(&b.r)));
        let (r_min, r_max) = radius_range(&cands);
        Self {
            t,
            value,
            balls: cands,
            r_min,
            r_max,
        }
    }

    /// The first cell attaining the maximum in reporting order.
    pub fn best(&self) -> Option<&GoodBall> {
        self.balls
            .iter()
            .fold(None, |acc: Option<&GoodBall>, b| match acc {
                Some(a) if a.value >= b.value => Some(a),
                _ => Some(b),
            })
    }

    /// Largest `| |s − t| − r |` over the set.
    pub fn tangency_defect(&self) -> f64 {
        self.balls
            .iter()
            .map(|b| ((b.s - self.t).abs() - b.r).abs())
            .fold(0.0, f64::max)
    }
}

fn radius_range(balls: &[GoodBall]) -> (f64, f64) {
    if balls.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    balls
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), b| {
            (lo.min(b.r), hi.max(b.r))
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaximalResult {
    pub variant: VariantSpec,
    pub d: usize,
    pub eval_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub good: Vec<GoodBallSet>,
    pub table_ref: String,
    /// Spacing of the search grid (center norms and radii).
    pub step: f64,
}

impl MaximalResult {
    pub fn beta(&self) -> f64 {
        self.variant.beta
    }

    pub fn kind(&self) -> VariantKind {
        self.variant.kind
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let rows = self.good.iter().map(|g| {
            let (s, r) = g.best().map_or((f64::NAN, f64::NAN), |b| (b.s, b.r));
            vec![g.t, g.value, g.r_min, g.r_max, s, r]
        });
        crate::csvio::write_rows(
            path,
            &["t", "value", "r_min", "r_max", "s_best", "r_best"],
            rows,
        )
    }
}

/// Search grids for an [`AverageTable`]: `s = 0, s_step, ..` and
/// `r = r_step, 2 r_step, ..`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableGrid {
    pub s_step: f64,
    pub r_step: f64,
    pub s_max: f64,
    pub r_max: f64,
}

impl TableGrid {
    /// Smallest grid that covers every evaluation point up to `eval_max`
    /// for one variant.
    pub fn for_variant(kind: VariantKind, support_end: f64, eval_max: f64, step: f64) -> Self {
        let a = support_end;
        let full = eval_max.max(a);
        let (s_max, r_max) = match kind {
            VariantKind::Noncentered => ((eval_max + full).min(a + full), full),
            VariantKind::Centered => (eval_max, eval_max + a),
            VariantKind::TruncatedQuarter => {
                let r = full.min(0.25 * eval_max);
                ((eval_max + r).min(a + r), r)
            }
            VariantKind::InnerOnly => (eval_max, eval_max),
            VariantKind::OuterOnly => {
                let r = full + a;
                ((eval_max + r).min(a + r), r)
            }
        };
        Self {
            s_step: step,
            r_step: step,
            s_max,
            r_max: r_max.max(step),
        }
    }

    /// Covers all variants at once.
    pub fn covering(support_end: f64, eval_max: f64, step: f64) -> Self {
        let r_max = eval_max.max(support_end) + support_end;
        Self {
            s_step: step,
            r_step: step,
            s_max: (eval_max + r_max).min(support_end + r_max),
            r_max: r_max.max(step),
        }
    }

    pub fn s_grid(&self) -> Vec<f64> {
        let n = (self.s_max / self.s_step - 1e-9).ceil().max(0.0) as usize;
        (0..=n).map(|i| i as f64 * self.s_step).collect()
    }

    pub fn r_grid(&self) -> Vec<f64> {
        let n = (self.r_max / self.r_step - 1e-9).ceil().max(1.0) as usize;
        (1..=n).map(|k| k as f64 * self.r_step).collect()
    }
}

/// Per-table search state: radii ordered by their value envelope
/// `r^β min(‖f‖_∞, ‖f‖₁ / (ω_d r^d))`, so rows that cannot beat the
/// current best are skipped.
struct Search<'a> {
    table: &'a AverageTable,
    order: Vec<usize>,
    bound: Vec<f64>,
}

impl<'a> Search<'a> {
    fn new(table: &'a AverageTable) -> Self {
        let d = table.d() as i32;
        let beta = table.beta();
        let omega = unit_ball_volume(table.d());
        let bound: Vec<f64> = table
            .r_grid()
            .iter()
            .map(|&r| {
                let env = table.linf().min(table.l1() / (omega * r.powi(d)));
                r.powf(beta) * env * (1.0 + 1e-6) + 1e-300
            })
            .collect();
        let mut order: Vec<usize> = (0..bound.len()).collect();
        order.sort_by(|&a, &b| bound[b].total_cmp(&bound[a]).then(a.cmp(&b)));
        Self {
            table,
            order,
            bound,
        }
    }

    fn check_coverage(&self, t: f64, kind: VariantKind) -> Result<()> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::OutOfCoverage {
                t,
                reason: "evaluation points must be finite and nonnegative".into(),
            });
        }
        let table = self.table;
        let r_top = *table.r_grid().last().unwrap();
        let s_top = *table.s_grid().last().unwrap();
        let slack = 0.5 * table.r_grid()[0] + 1e-9 * (1.0 + t);
        if let Some(cap) = kind.radius_cap(t, table.support_end()) {
            if r_top + slack < cap {
                return Err(Error::OutOfCoverage {
                    t,
                    reason: format!("radius grid ends at {r_top}, need {cap}"),
                });
            }
            let need_s = match kind {
                VariantKind::Centered | VariantKind::InnerOnly => t,
                _ => (t + cap).min(table.support_end() + cap),
            };
            if s_top + slack < need_s {
                return Err(Error::OutOfCoverage {
                    t,
                    reason: format!("center grid ends at {s_top}, need {need_s}"),
                });
            }
        }
        Ok(())
    }

    fn run(&self, t: f64, kind: VariantKind, point: Option<f64>) -> GoodBallSet {
        let table = self.table;
        let s_grid = table.s_grid();
        let r_grid = table.r_grid();
        let mut best = 0.0_f64;
        let mut cands = Vec::new();
        if let Some(p) = point.filter(|_| table.beta() == 0.0) {
            best = p;
            cands.push(GoodBall {
                s: t,
                r: 0.0,
                value: p,
            });
        }
        for &k in &self.order {
            if self.bound[k] < (1.0 - GOOD_BALL_TOL) * best {
                break;
            }
            let r = r_grid[k];
            if kind == VariantKind::TruncatedQuarter && !kind.admits(t, t, r) {
                continue;
            }
            let (lo, hi) = kind.s_window(t, r);
            let start = s_grid.partition_point(|&s| s < lo);
            for (i, &s) in s_grid.iter().enumerate().skip(start) {
                if s > hi {
                    break;
                }
                if !kind.admits(t, s, r) {
                    continue;
                }
                let v = table.value(i, k);
                if v >= (1.0 - GOOD_BALL_TOL) * best && v > 0.0 {
                    best = best.max(v);
                    cands.push(GoodBall { s, r, value: v });
                }
            }
        }
        GoodBallSet::from_candidates(t, cands)
    }
}

/// Index of `t` in `grid`, if it is a node up to rounding.
fn grid_index(grid: &[f64], t: f64) -> Option<usize> {
    let tol = 1e-9 * (1.0 + t.abs());
    let i = grid.partition_point(|&s| s < t - tol);
    (i < grid.len() && (grid[i] - t).abs() <= tol).then_some(i)
}

/// `M_β` of the table's source at `t` for one variant, with its good balls.
///
/// At `β = 0` the degenerate `r = 0` cell with value `|f̃(t)|` is included
/// when `t` lies on the center grid.
pub fn maximal_radial(table: &AverageTable, t: f64, kind: VariantKind) -> Result<GoodBallSet> {
    let search = Search::new(table);
    search.check_coverage(t, kind)?;
    let idx = grid_index(table.s_grid(), t);
    if kind == VariantKind::Centered && idx.is_none() {
        return Err(Error::OutOfCoverage {
            t,
            reason: "centered evaluation needs t on the center grid".into(),
        });
    }
    Ok(search.run(t, kind, idx.map(|i| table.point_value(i))))
}

/// Evaluate every point of `eval_grid` against one table. Centered points
/// off the center grid get their exact `s = t` column from `dens`.
pub fn maximal_with_table(
    table: &AverageTable,
    dens: Option<&RadialDensity>,
    kind: VariantKind,
    eval_grid: &[f64],
) -> Result<MaximalResult> {
    if eval_grid.is_empty() {
        return Err(Error::InvalidGrid("evaluation grid is empty".into()));
    }
    let search = Search::new(table);
    let ctx = CapKernelContext::new(table.d())?;
    let good: Vec<GoodBallSet> = eval_grid
        .par_iter()
        .map(|&t| {
            search.check_coverage(t, kind)?;
            let idx = grid_index(table.s_grid(), t);
            let point = match (dens, idx) {
                (Some(dn), _) => Some(dn.point_sup(t)),
                (None, Some(i)) => Some(table.point_value(i)),
                (None, None) => None,
            };
            match (kind, idx, dens) {
                (VariantKind::Centered, None, Some(dn)) => {
                    Ok(centered_column(dn, table, t, point, &ctx))
                }
                (VariantKind::Centered, None, None) => Err(Error::OutOfCoverage {
                    t,
                    reason: "centered evaluation needs t on the center grid".into(),
                }),
                _ => Ok(search.run(t, kind, point)),
            }
        })
        .collect::<Result<_>>()?;
    Ok(MaximalResult {
        variant: VariantSpec {
            kind,
            beta: table.beta(),
        },
        d: table.d(),
        eval_grid: eval_grid.to_vec(),
        values: good.iter().map(|g| g.value).collect(),
        good,
        table_ref: table.cache_key(),
        step: table.r_grid()[0],
    })
}

fn centered_column(
    dens: &RadialDensity,
    table: &AverageTable,
    t: f64,
    point: Option<f64>,
    ctx: &CapKernelContext,
) -> GoodBallSet {
    let beta = table.beta();
    let mut cands: Vec<GoodBall> = table
        .r_grid()
        .iter()
        .map(|&r| GoodBall {
            s: t,
            r,
            value: r.powf(beta) * dens.ball_integral(t, r, Kernel::Cap, ctx).max(0.0),
        })
        .collect();
    if let Some(p) = point.filter(|_| beta == 0.0) {
        cands.push(GoodBall {
            s: t,
            r: 0.0,
            value: p,
        });
    }
    GoodBallSet::from_candidates(t, cands)
}

/// `M_β` of an arbitrary radial density over `eval_grid`, searching on a
/// grid of spacing `step`.
pub fn maximal_density(
    dens: &RadialDensity,
    f_ref: &str,
    beta: f64,
    kind: VariantKind,
    eval_grid: &[f64],
    step: f64,
) -> Result<MaximalResult> {
    check_beta(beta, dens.d())?;
    check_eval_grid(eval_grid)?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidGrid(format!(
            "search step {step} must be positive"
        )));
    }
    let eval_max = eval_grid.iter().copied().fold(0.0, f64::max);
    let grid = TableGrid::for_variant(kind, dens.support_end(), eval_max, step);
    let ctx = CapKernelContext::new(dens.d())?;
    let table =
        AverageTable::from_density(dens, f_ref, beta, &grid.s_grid(), &grid.r_grid(), &ctx)?;
    maximal_with_table(&table, Some(dens), kind, eval_grid)
}

/// `M_β |f|` on `eval_grid` with the default search step `h`.
pub fn maximal_profile(
    f: &RadialProfile,
    beta: f64,
    kind: VariantKind,
    eval_grid: &[f64],
) -> Result<MaximalResult> {
    maximal_profile_with_step(f, beta, kind, eval_grid, f.h())
}

pub fn maximal_profile_with_step(
    f: &RadialProfile,
    beta: f64,
    kind: VariantKind,
    eval_grid: &[f64],
    step: f64,
) -> Result<MaximalResult> {
    maximal_density(
        &RadialDensity::abs_of(f),
        &f.content_hash(),
        beta,
        kind,
        eval_grid,
        step,
    )
}

fn check_eval_grid(eval_grid: &[f64]) -> Result<()> {
    if eval_grid.is_empty() {
        return Err(Error::InvalidGrid("evaluation grid is empty".into()));
    }
    if let Some(t) = eval_grid.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
        return Err(Error::InvalidGrid(format!(
            "evaluation point {t} must be finite and nonnegative"
        )));
    }
    Ok(())
}

/// `0, step, .., t_end` (inclusive up to rounding).
pub fn uniform_grid(t_start: f64, t_end: f64, step: f64) -> Vec<f64> {
    let n = ((t_end - t_start) / step + 1e-9).floor().max(0.0) as usize;
    (0..=n).map(|i| t_start + i as f64 * step).collect()
}

/// `M_β |f|` on the nodes of a line function, over intervals with node
/// endpoints (non-centered) or radii `k h` (centered). Intervals reaching
/// past the domain never help when `β < 1`, so the search stops there.
pub fn maximal_1d(f: &LineFunction, beta: f64, centered: bool) -> Result<MaximalResult> {
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::BetaOutOfRange { beta, upper: 1.0 });
    }
    let n = f.len() - 1;
    let h = f.h();
    let prefix = f.abs_prefix();
    let point: Vec<f64> = f.values().iter().map(|v| v.abs()).collect();
    let good = if centered {
        centered_1d(f, beta, &prefix, &point)
    } else {
        noncentered_1d(f, beta, &prefix, &point)
    };
    Ok(MaximalResult {
        variant: VariantSpec {
            kind: if centered {
                VariantKind::Centered
            } else {
                VariantKind::Noncentered
            },
            beta,
        },
        d: 1,
        eval_grid: f.nodes(),
        values: good.iter().map(|g| g.value).collect(),
        good,
        table_ref: format!("line-{n}-{h}"),
        step: if centered { h } else { 0.5 * h },
    })
}

fn centered_1d(f: &LineFunction, beta: f64, prefix: &[f64], point: &[f64]) -> Vec<GoodBallSet> {
    let n = prefix.len() - 1;
    let h = f.h();
    let weight: Vec<f64> = (0..=n)
        .map(|k| {
            if k == 0 {
                0.0
            } else {
                (k as f64 * h).powf(beta) / (2.0 * k as f64 * h)
            }
        })
        .collect();
    (0..=n)
        .into_par_iter()
        .map(|i| {
            let x = f.node(i);
            let reach = i.max(n - i);
            let mut cands = Vec::with_capacity(reach + 1);
            if beta == 0.0 {
                cands.push(GoodBall {
                    s: x,
                    r: 0.0,
                    value: point[i],
                });
            }
            for k in 1..=reach {
                let lo = i.saturating_sub(k);
                let hi = (i + k).min(n);
                cands.push(GoodBall {
                    s: x,
                    r: k as f64 * h,
                    value: weight[k] * (prefix[hi] - prefix[lo]),
                });
            }
            GoodBallSet::from_candidates(x, cands)
        })
        .collect()
}

fn noncentered_1d(f: &LineFunction, beta: f64, prefix: &[f64], point: &[f64]) -> Vec<GoodBallSet> {
    let n = prefix.len() - 1;
    let h = f.h();
    let weight: Vec<f64> = (0..=n)
        .map(|m| {
            if m == 0 {
                0.0
            } else {
                let r = 0.5 * m as f64 * h;
                r.powf(beta) / (2.0 * r)
            }
        })
        .collect();
    let value = |a: usize, b: usize| weight[b - a] * (prefix[b] - prefix[a]);
    // suffix maxima over right endpoints b >= j for a fixed left endpoint a,
    // ties resolved toward the smaller b
    let suffix = |a: usize, out: &mut Vec<(f64, usize)>| {
        out.clear();
        out.resize(n + 1, (0.0, n));
        let mut cur = (f64::NEG_INFINITY, n);
        for b in (a + 1..=n).rev() {
            let v = value(a, b);
            if v >= cur.0 {
                cur = (v, b);
            }
            out[b] = cur;
        }
    };

    let mut best: Vec<f64> = if beta == 0.0 {
        point.to_vec()
    } else {
        vec![0.0; n + 1]
    };
    let mut buf = Vec::new();
    for a in 0..n {
        suffix(a, &mut buf);
        for (i, slot) in best.iter_mut().enumerate().skip(a) {
            *slot = slot.max(buf[i.max(a + 1)].0);
        }
    }

    let mut stored: Vec<Vec<GoodBall>> = vec![Vec::new(); n + 1];
    let mut span: Vec<(f64, f64)> = vec![(f64::INFINITY, f64::NEG_INFINITY); n + 1];
    let mut record = |i: usize, ball: GoodBall, stored: &mut Vec<Vec<GoodBall>>| {
        span[i] = (span[i].0.min(ball.r), span[i].1.max(ball.r));
        if stored[i].len() < MAX_STORED_INTERVALS {
            stored[i].push(ball);
        }
    };
    if beta == 0.0 {
        for i in 0..=n {
            if point[i] > 0.0 && point[i] >= (1.0 - GOOD_BALL_TOL) * best[i] {
                record(
                    i,
                    GoodBall {
                        s: f.node(i),
                        r: 0.0,
                        value: point[i],
                    },
                    &mut stored,
                );
            }
        }
    }
    for a in 0..n {
        suffix(a, &mut buf);
        for i in a..=n {
            let (v, b) = buf[i.max(a + 1)];
            if best[i] > 0.0 && v >= (1.0 - GOOD_BALL_TOL) * best[i] {
                let ball = GoodBall {
                    s: 0.5 * (f.node(a) + f.node(b)),
                    r: 0.5 * (b - a) as f64 * h,
                    value: v,
                };
                record(i, ball, &mut stored);
            }
        }
    }
    stored
        .into_iter()
        .enumerate()
        .map(|(i, mut balls)| {
            let t = f.node(i);
            if best[i] <= 0.0 {
                return GoodBallSet {
                    t,
                    value: 0.0,
                    balls: Vec::new(),
                    r_min: f64::NAN,
                    r_max: f64::NAN,
                };
            }
            balls.sort_by(|a, b| a.s.total_cmp(&b.s).then(a.r.total_cmp(&b.r)));
            GoodBallSet {
                t,
                value: best[i],
                balls,
                r_min: span[i].0,
                r_max: span[i].1,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadiusStats {
    /// Points with positive value.
    pub points: usize,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    pub r_median: Option<f64>,
    /// Points whose good set contains the degenerate `r = 0` cell.
    pub zero_radius_points: usize,
    /// `(t, max | |s − t| − r |)` per point with positive value.
    pub tangency: Vec<(f64, f64)>,
}

pub fn good_radius_stats(result: &MaximalResult) -> RadiusStats {
    let mut radii = Vec::new();
    let mut tangency = Vec::new();
    let mut zero_radius_points = 0;
    for g in result.good.iter().filter(|g| g.value > 0.0) {
        radii.extend(g.balls.iter().map(|b| b.r));
        if g.balls.iter().any(|b| b.r == 0.0) {
            zero_radius_points += 1;
        }
        tangency.push((g.t, g.tangency_defect()));
    }
    radii.sort_by(f64::total_cmp);
    let median = (!radii.is_empty()).then(|| {
        let m = radii.len() / 2;
        if radii.len() % 2 == 1 {
            radii[m]
        } else {
            0.5 * (radii[m - 1] + radii[m])
        }
    });
    RadiusStats {
        points: tangency.len(),
        r_min: radii.first().copied(),
        r_max: radii.last().copied(),
        r_median: median,
        zero_radius_points,
        tangency,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::{make_profile, LineSpec, ProfileSpec, RadialGrid};
    use approx::assert_relative_eq;

    fn tent(d: usize, h: f64) -> RadialProfile {
        make_profile(
            &ProfileSpec::Tent { a: 1.0 },
            &RadialGrid::new(d, h, 2.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn variant_constraints() {
        use VariantKind::*;
        assert!(Noncentered.admits(1.0, 1.5, 0.5));
        assert!(!Noncentered.admits(1.0, 1.6, 0.5));
        assert!(Centered.admits(1.0, 1.0, 3.0));
        assert!(!TruncatedQuarter.admits(1.0, 1.0, 0.3));
        assert!(InnerOnly.admits(1.0, 0.5, 0.5));
        assert!(!InnerOnly.admits(1.0, 0.6, 0.5));
        assert!(OuterOnly.admits(1.0, 1.5, 0.5));
        assert!(!OuterOnly.admits(1.0, 1.4, 0.5));
        for k in VariantKind::ALL {
            assert_eq!(k.name().parse::<VariantKind>().unwrap(), k);
        }
        assert!("diagonal".parse::<VariantKind>().is_err());
    }

    #[test]
    fn tent_1d_centered_closed_form() {
        let f = tent(1, 0.001);
        let res = maximal_profile(&f, 0.5, VariantKind::Centered, &[0.0]).unwrap();
        let g = &res.good[0];
        assert_relative_eq!(g.value, (2.0_f64 / 3.0).powf(1.5), epsilon = 1e-6);
        assert!((g.best().unwrap().r - 2.0 / 3.0).abs() <= 0.002);
    }

    #[test]
    fn line_tent_centered_closed_form() {
        let f = LineFunction::from_spec(
            &LineSpec::Tent {
                center: 0.0,
                a: 1.0,
            },
            -2.0,
            2.0,
            0.001,
        )
        .unwrap();
        let res = maximal_1d(&f, 0.5, true).unwrap();
        let mid = res.eval_grid.iter().position(|x| x.abs() < 1e-9).unwrap();
        assert_relative_eq!(res.values[mid], (2.0_f64 / 3.0).powf(1.5), epsilon = 1e-6);
        assert!((res.good[mid].best().unwrap().r - 2.0 / 3.0).abs() <= 0.002);
    }

    #[test]
    fn indicator_centered_at_origin() {
        let grid = RadialGrid::new(2, 0.01, 2.0).unwrap();
        let f = make_profile(
            &ProfileSpec::SmoothedIndicator { a: 1.0, ramp: 0.02 },
            &grid,
        )
        .unwrap();
        let res = maximal_profile(&f, 0.7, VariantKind::Centered, &[0.0]).unwrap();
        assert!((res.values[0] - 1.0).abs() < 0.02, "{}", res.values[0]);
        assert!((res.good[0].best().unwrap().r - 1.0).abs() < 0.05);
    }

    #[test]
    fn zero_profile_has_empty_good_sets() {
        let f = RadialProfile::zero(&RadialGrid::new(2, 0.1, 1.0).unwrap()).unwrap();
        let res = maximal_profile(&f, 0.5, VariantKind::Noncentered, &[0.0, 0.5]).unwrap();
        assert!(res.values.iter().all(|&v| v == 0.0));
        assert!(res.good.iter().all(|g| g.balls.is_empty()));
        assert_eq!(good_radius_stats(&res).points, 0);
    }

    #[test]
    fn variant_ordering_on_tent() {
        let f = tent(2, 0.02);
        let eval = uniform_grid(0.0, 1.5, 0.02);
        let non = maximal_profile(&f, 0.5, VariantKind::Noncentered, &eval).unwrap();
        for kind in [
            VariantKind::Centered,
            VariantKind::TruncatedQuarter,
            VariantKind::InnerOnly,
            VariantKind::OuterOnly,
        ] {
            let other = maximal_profile(&f, 0.5, kind, &eval).unwrap();
            for (a, b) in other.values.iter().zip(&non.values) {
                assert!(*a <= b * (1.0 + 1e-12), "{kind}: {a} > {b}");
            }
        }
    }

    #[test]
    fn truncated_drops_near_origin() {
        let f = tent(2, 0.02);
        let eval = uniform_grid(0.0, 1.0, 0.1);
        let non = maximal_profile(&f, 0.5, VariantKind::Noncentered, &eval).unwrap();
        let tr = maximal_profile(&f, 0.5, VariantKind::TruncatedQuarter, &eval).unwrap();
        assert!(tr.values[1] < 0.9 * non.values[1]);
    }

    #[test]
    fn good_balls_respect_variant() {
        let f = tent(2, 0.02);
        let eval = uniform_grid(0.0, 1.5, 0.1);
        for kind in VariantKind::ALL {
            let res = maximal_profile(&f, 0.5, kind, &eval).unwrap();
            for g in &res.good {
                assert!(g.value == 0.0 || !g.balls.is_empty());
                for b in &g.balls {
                    assert!(
                        kind.admits(g.t, b.s, b.r),
                        "{kind} t={} s={} r={}",
                        g.t,
                        b.s,
                        b.r
                    );
                    assert!(b.r > 0.0);
                }
            }
        }
    }

    #[test]
    fn beta_zero_plateau_has_radius_zero_cells() {
        let grid = RadialGrid::new(2, 0.02, 3.0).unwrap();
        let f = make_profile(&ProfileSpec::SmoothedIndicator { a: 2.0, ramp: 0.2 }, &grid).unwrap();
        let res = maximal_profile(&f, 0.0, VariantKind::Noncentered, &[0.5]).unwrap();
        assert_relative_eq!(res.values[0], 1.0, epsilon = 1e-9);
        assert!(good_radius_stats(&res).zero_radius_points == 1);
    }

    #[test]
    fn off_grid_centered_point() {
        let f = tent(2, 0.02);
        let res = maximal_profile(&f, 0.5, VariantKind::Centered, &[0.013]).unwrap();
        assert!(res.values[0] > 0.0);
        let s = TableGrid::for_variant(VariantKind::Centered, 1.0, 0.5, 0.02);
        let table = crate::geometry::build_average_table(
            &f,
            0.5,
            &s.s_grid(),
            &s.r_grid(),
            &CapKernelContext::new(2).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            maximal_radial(&table, 0.013, VariantKind::Centered),
            Err(Error::OutOfCoverage { .. })
        ));
        assert!(matches!(
            maximal_radial(&table, 5.0, VariantKind::Centered),
            Err(Error::OutOfCoverage { .. })
        ));
    }

    #[test]
    fn one_dimensional_pipelines_agree() {
        // even line function vs radial d = 1 profile
        let h = 0.01;
        let rad = tent(1, h);
        let line = LineFunction::from_spec(
            &LineSpec::Tent {
                center: 0.0,
                a: 1.0,
            },
            -2.0,
            2.0,
            h,
        )
        .unwrap();
        for &beta in &[0.0, 0.5] {
            let eval = uniform_grid(0.0, 1.5, 0.1);
            let r = maximal_profile(&rad, beta, VariantKind::Centered, &eval).unwrap();
            let l = maximal_1d(&line, beta, true).unwrap();
            for (t, v) in eval.iter().zip(&r.values) {
                let i = ((t + 2.0) / h).round() as usize;
                assert_relative_eq!(*v, l.values[i], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn noncentered_line_dominates_centered() {
        let f = LineFunction::from_spec(
            &LineSpec::RandomPl {
                seed: 3,
                n_knots: 6,
                left: -1.0,
                right: 1.0,
            },
            -2.0,
            2.0,
            0.01,
        )
        .unwrap();
        for &beta in &[0.0, 0.4] {
            let c = maximal_1d(&f, beta, true).unwrap();
            let n = maximal_1d(&f, beta, false).unwrap();
            for (a, b) in c.values.iter().zip(&n.values) {
                assert!(*a <= b + 1e-12);
            }
        }
        assert!(maximal_1d(&f, 1.0, true).is_err());
    }
}
