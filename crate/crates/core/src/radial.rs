//! Piecewise-linear radial profiles and line functions.
//!
//! A radial function `f(x) = f̃(|x|)` on `R^d` is stored through its profile
//! `f̃` on `[0, t_max]`: node positions and values, linear in between and
//! identically zero beyond `t_max`. Norms carry the full measure constant
//! `d·ω_d`, so `lp_norm` is the norm of `f` on `R^d`, not of `f̃` on the
//! half-line.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / d as f64 * unit_ball_volume(d - 2),
    }
}

/// Surface measure of the unit sphere, `d·ω_d`.
pub fn sphere_measure(d: usize) -> f64 {
    d as f64 * unit_ball_volume(d)
}

/// Ambient dimension and node grid of a profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub d: usize,
    pub h: f64,
    pub t_max: f64,
}

impl RadialGrid {
    pub fn new(d: usize, h: f64, t_max: f64) -> Result<Self> {
        let grid = Self { d, h, t_max };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidGrid("dimension must be at least 1".into()));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "spacing h = {} must be positive",
                self.h
            )));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "t_max = {} must be positive",
                self.t_max
            )));
        }
        let n = self.t_max / self.h;
        if (n - n.round()).abs() > 1e-6 * n.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "t_max = {} is not a multiple of h = {}",
                self.t_max, self.h
            )));
        }
        if n.round() < 2.0 {
            return Err(Error::InvalidGrid("need at least two grid cells".into()));
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        (self.t_max / self.h).round() as usize
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.cells()).map(|i| i as f64 * self.h).collect()
    }

    pub fn refined(&self) -> Self {
        Self {
            h: self.h / 2.0,
            ..*self
        }
    }
}

/// One tent-shaped bump `height·max(0, 1 - |t - center| / width)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: f64,
    pub width: f64,
    pub height: f64,
}

/// Named function presets.
///
/// Parsed from and printed as call syntax, e.g. `tent(1)`,
/// `smoothed_indicator(1, 0.05)`, `random_pl(7, 5)`,
/// `bump_sum((0.5, 0.2, 1), (1.2, 0.3, -0.5))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ProfileSpec {
    /// `max(0, 1 - t/a)`.
    Tent {
        a: f64,
    },
    /// 1 on `[0, a]`, linear down to 0 on `[a, a + ramp]`.
    SmoothedIndicator {
        a: f64,
        ramp: f64,
    },
    BumpSum {
        bumps: Vec<Bump>,
    },
    /// Seeded random values in `[-1, 1]` at `n_knots` equispaced knots,
    /// zero at `t_max`.
    RandomPl {
        seed: u64,
        n_knots: usize,
    },
    /// `max(0, 1 - (t/a)^2)`.
    Quadratic {
        a: f64,
    },
}

impl ProfileSpec {
    fn value_at(&self, t: f64, t_max: f64, knots: &[f64]) -> f64 {
        match self {
            ProfileSpec::Tent { a } => (1.0 - t / a).max(0.0),
            ProfileSpec::SmoothedIndicator { a, ramp } => {
                if t <= *a {
                    1.0
                } else if t >= a + ramp {
                    0.0
                } else {
                    1.0 - (t - a) / ramp
                }
            }
            ProfileSpec::BumpSum { bumps } => bumps
                .iter()
                .map(|b| b.height * (1.0 - (t - b.center).abs() / b.width).max(0.0))
                .sum(),
            ProfileSpec::RandomPl { n_knots, .. } => {
                let spacing = t_max / *n_knots as f64;
                let k = ((t / spacing).floor() as usize).min(*n_knots - 1);
                let w = (t - k as f64 * spacing) / spacing;
                knots[k] * (1.0 - w) + knots[k + 1] * w
            }
            ProfileSpec::Quadratic { a } => (1.0 - (t / a) * (t / a)).max(0.0),
        }
    }

    fn check(&self, t_max: f64) -> Result<()> {
        let tol = 1e-12 * t_max;
        match self {
            ProfileSpec::Tent { a } | ProfileSpec::Quadratic { a } => {
                if !(*a > 0.0) {
                    return Err(invalid("a", "must be positive"));
                }
                if *a > t_max + tol {
                    return Err(invalid(
                        "a",
                        format!("support radius {a} exceeds t_max = {t_max}"),
                    ));
                }
            }
            ProfileSpec::SmoothedIndicator { a, ramp } => {
                if !(*a > 0.0) || *ramp < 0.0 {
                    return Err(invalid("a", "need a > 0 and ramp >= 0"));
                }
                if a + ramp >= t_max - tol {
                    return Err(invalid(
                        "ramp",
                        format!("a + ramp = {} must stay below t_max = {t_max}", a + ramp),
                    ));
                }
            }
            ProfileSpec::BumpSum { bumps } => {
                for b in bumps {
                    if !(b.width > 0.0) || b.center < 0.0 {
                        return Err(invalid("bumps", "widths must be positive, centers >= 0"));
                    }
                    if b.center + b.width > t_max + tol {
                        return Err(invalid(
                            "bumps",
                            format!("bump at {} reaches beyond t_max = {t_max}", b.center),
                        ));
                    }
                }
            }
            ProfileSpec::RandomPl { n_knots, .. } => {
                if *n_knots < 1 {
                    return Err(invalid("n_knots", "need at least one knot"));
                }
            }
        }
        Ok(())
    }

    fn knots(&self) -> Vec<f64> {
        match self {
            ProfileSpec::RandomPl { seed, n_knots } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut v: Vec<f64> = (0..*n_knots)
                    .map(|_| rng.random_range(-1.0..=1.0))
                    .collect();
                v.push(0.0);
                v
            }
            _ => Vec::new(),
        }
    }
}

impl fmt::Display for ProfileSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProfileSpec::Tent { a } => write!(f, "tent({a})"),
            ProfileSpec::SmoothedIndicator { a, ramp } => {
                write!(f, "smoothed_indicator({a}, {ramp})")
            }
            ProfileSpec::BumpSum { bumps } => {
                write!(f, "bump_sum(")?;
                for (i, b) in bumps.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "({}, {}, {})", b.center, b.width, b.height)?;
                }
                write!(f, ")")
            }
            ProfileSpec::RandomPl { seed, n_knots } => write!(f, "random_pl({seed}, {n_knots})"),
            ProfileSpec::Quadratic { a } => write!(f, "quadratic({a})"),
        }
    }
}

impl FromStr for ProfileSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(open) if s.ends_with(')') => (&s[..open], &s[open + 1..s.len() - 1]),
            _ => return Err(Error::UnknownPreset(s.to_string())),
        };
        let numbers = |args: &str| -> Result<Vec<f64>> {
            args.split(',')
                .map(str::trim)
                .filter(|a| !a.is_empty())
                .map(|a| {
                    a.parse::<f64>()
                        .map_err(|_| invalid("preset", format!("bad number `{a}`")))
                })
                .collect()
        };
        let expect = |v: Vec<f64>, n: usize| -> Result<Vec<f64>> {
            if v.len() == n {
                Ok(v)
            } else {
                Err(invalid(
                    "preset",
                    format!("`{name}` takes {n} arguments, got {}", v.len()),
                ))
            }
        };
        match name.trim() {
            "tent" => Ok(ProfileSpec::Tent {
                a: expect(numbers(args)?, 1)?[0],
            }),
            "quadratic" => Ok(ProfileSpec::Quadratic {
                a: expect(numbers(args)?, 1)?[0],
            }),
            "smoothed_indicator" => {
                let v = expect(numbers(args)?, 2)?;
                Ok(ProfileSpec::SmoothedIndicator {
                    a: v[0],
                    ramp: v[1],
                })
            }
            "random_pl" => {
                let v = expect(numbers(args)?, 2)?;
                Ok(ProfileSpec::RandomPl {
                    seed: v[0] as u64,
                    n_knots: v[1] as usize,
                })
            }
            "bump_sum" => {
                let mut bumps = Vec::new();
                let mut rest = args.trim();
                while let Some(open) = rest.find('(') {
                    let close = rest[open..]
                        .find(')')
                        .ok_or_else(|| invalid("bumps", "unbalanced parentheses"))?
                        + open;
                    let v = numbers(&rest[open + 1..close])?;
                    if v.len() != 3 {
                        return Err(invalid("bumps", "each bump is (center, width, height)"));
                    }
                    bumps.push(Bump {
                        center: v[0],
                        width: v[1],
                        height: v[2],
                    });
                    rest = &rest[close + 1..];
                }
                Ok(ProfileSpec::BumpSum { bumps })
            }
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }
}

impl TryFrom<String> for ProfileSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ProfileSpec> for String {
    fn from(spec: ProfileSpec) -> String {
        spec.to_string()
    }
}

/// Sample a preset on a uniform grid.
pub fn make_profile(spec: &ProfileSpec, grid: &RadialGrid) -> Result<RadialProfile> {
    grid.validate()?;
    spec.check(grid.t_max)?;
    let knots = spec.knots();
    let nodes = grid.nodes();
    let n = nodes.len() - 1;
    let mut values: Vec<f64> = nodes
        .iter()
        .map(|&t| spec.value_at(t, grid.t_max, &knots))
        .collect();
    values[n] = 0.0;
    RadialProfile::new(grid.d, grid.h, nodes, values)
}

/// Piecewise-linear radial profile `f̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    d: usize,
    h: f64,
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl RadialProfile {
    /// Build from explicit nodes. `h` is the nominal (coarsest uniform)
    /// spacing; nodes may be refined locally.
    pub fn new(d: usize, h: f64, nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidProfile("dimension must be at least 1".into()));
        }
        if nodes.len() != values.len() || nodes.len() < 3 {
            return Err(Error::InvalidProfile(format!(
                "need matching node/value arrays of length >= 3 (got {} and {})",
                nodes.len(),
                values.len()
            )));
        }
        if nodes[0] != 0.0 {
            return Err(Error::InvalidProfile("first node must be t = 0".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidProfile(
                "nodes must be strictly increasing".into(),
            ));
        }
        if values.iter().chain(&nodes).any(|v| !v.is_finite()) {
            return Err(Error::InvalidProfile("non-finite sample".into()));
        }
        if *values.last().unwrap() != 0.0 {
            return Err(Error::InvalidProfile("profile must vanish at t_max".into()));
        }
        Ok(Self {
            d,
            h,
            nodes,
            values,
        })
    }

    pub fn from_uniform(d: usize, h: f64, values: Vec<f64>) -> Result<Self> {
        let nodes = (0..values.len()).map(|i| i as f64 * h).collect();
        Self::new(d, h, nodes, values)
    }

    pub fn zero(grid: &RadialGrid) -> Result<Self> {
        Self::from_uniform(grid.d, grid.h, vec![0.0; grid.cells() + 1])
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn t_max(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grid(&self) -> RadialGrid {
        RadialGrid {
            d: self.d,
            h: self.h,
            t_max: self.t_max(),
        }
    }

    /// Value of `f̃` at `t >= 0`; zero beyond `t_max`.
    pub fn eval(&self, t: f64) -> f64 {
        let t = t.abs();
        if t >= self.t_max() {
            return 0.0;
        }
        let k = self.nodes.partition_point(|&x| x <= t) - 1;
        let (a, b) = (self.nodes[k], self.nodes[k + 1]);
        let w = (t - a) / (b - a);
        self.values[k] * (1.0 - w) + self.values[k + 1] * w
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| c * v).collect(),
            ..self.clone()
        }
    }

    /// `self + c·other` on the union of both node sets (exact).
    pub fn add_scaled(&self, other: &RadialProfile, c: f64) -> Result<Self> {
        if self.d != other.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: other.d,
            });
        }
        let nodes = merge_nodes(&self.nodes, &other.nodes);
        let values = nodes
            .iter()
            .map(|&t| self.eval(t) + c * other.eval(t))
            .collect();
        Self::new(self.d, self.h.min(other.h), nodes, values)
    }

    pub fn sub(&self, other: &RadialProfile) -> Result<Self> {
        self.add_scaled(other, -1.0)
    }

    /// Same function with a midpoint inserted in every segment.
    pub fn refined(&self) -> Self {
        let mut nodes = Vec::with_capacity(2 * self.nodes.len());
        let mut values = Vec::with_capacity(2 * self.nodes.len());
        for k in 0..self.nodes.len() - 1 {
            nodes.push(self.nodes[k]);
            values.push(self.values[k]);
            nodes.push(0.5 * (self.nodes[k] + self.nodes[k + 1]));
            values.push(0.5 * (self.values[k] + self.values[k + 1]));
        }
        nodes.push(self.t_max());
        values.push(0.0);
        Self {
            d: self.d,
            h: self.h / 2.0,
            nodes,
            values,
        }
    }

    /// Radius beyond which `f̃` vanishes identically.
    pub fn support_end(&self) -> f64 {
        match self.values.iter().rposition(|&v| v != 0.0) {
            Some(k) => self.nodes[(k + 1).min(self.nodes.len() - 1)],
            None => 0.0,
        }
    }

    /// `L^p(R^d)` norm; `p = f64::INFINITY` gives the sup norm.
    ///
    /// Composite trapezoid over nodes and segment midpoints.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return Err(invalid("p", format!("Lebesgue exponent {p} must be >= 1")));
        }
        if p.is_infinite() {
            return Ok(self.max_abs());
        }
        let d = self.d as i32;
        let integrand = |t: f64, v: f64| v.abs().powf(p) * t.powi(d - 1);
        let mut acc = 0.0;
        for k in 0..self.nodes.len() - 1 {
            let (a, b) = (self.nodes[k], self.nodes[k + 1]);
            let (va, vb) = (self.values[k], self.values[k + 1]);
            let m = 0.5 * (a + b);
            acc += 0.25
                * (b - a)
                * (integrand(a, va) + 2.0 * integrand(m, 0.5 * (va + vb)) + integrand(b, vb));
        }
        Ok((sphere_measure(self.d) * acc).powf(1.0 / p))
    }

    pub fn l1_norm(&self) -> f64 {
        self.lp_norm(1.0).expect("p = 1 is valid")
    }

    /// Piecewise-constant slope profile `f̃'`.
    pub fn weak_derivative(&self) -> SlopeProfile {
        let slopes = self
            .nodes
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(t, v)| (v[1] - v[0]) / (t[1] - t[0]))
            .collect();
        SlopeProfile {
            d: self.d,
            nodes: self.nodes.clone(),
            slopes,
        }
    }

    /// `‖∇f‖_{L¹(R^d)}`, exact.
    pub fn grad_l1(&self) -> f64 {
        self.weak_derivative().l1_norm()
    }

    pub fn w11_norm(&self) -> f64 {
        self.l1_norm() + self.grad_l1()
    }

    /// `|f̃|` with every sign change inserted as a node, so the result is
    /// again exactly piecewise linear.
    pub fn modulus(&self) -> RadialProfile {
        let mut nodes = Vec::with_capacity(self.nodes.len());
        let mut values = Vec::with_capacity(self.values.len());
        for k in 0..self.nodes.len() - 1 {
            let (a, b) = (self.nodes[k], self.nodes[k + 1]);
            let (va, vb) = (self.values[k], self.values[k + 1]);
            nodes.push(a);
            values.push(va.abs());
            if va * vb < 0.0 {
                let z = a + va / (va - vb) * (b - a);
                if z > a && z < b {
                    nodes.push(z);
                    values.push(0.0);
                }
            }
        }
        nodes.push(self.t_max());
        values.push(0.0);
        Self {
            d: self.d,
            h: self.h,
            nodes,
            values,
        }
    }

    /// Short content hash used to key table caches.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.d as u64).to_le_bytes());
        for v in self.nodes.iter().chain(&self.values) {
            hasher.update(v.to_le_bytes());
        }
        hex::encode(hasher.finalize())[..16].to_string()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let rows = self
            .nodes
            .iter()
            .zip(&self.values)
            .map(|(&t, &v)| vec![t, v]);
        crate::csvio::write_rows(path, &["t", "value"], rows)
    }

    pub fn read_csv(path: impl AsRef<Path>, d: usize) -> Result<Self> {
        let rows = crate::csvio::read_rows(path, 2)?;
        let nodes: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let values: Vec<f64> = rows.iter().map(|r| r[1]).collect();
        let h = nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        Self::new(d, h, nodes, values)
    }
}

pub(crate) fn merge_nodes(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    let scale = all.last().copied().unwrap_or(1.0).abs().max(1.0);
    all.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * scale);
    all
}

/// Piecewise-constant derivative profile: `slopes[k]` holds on
/// `[nodes[k], nodes[k+1])`, zero beyond the last node.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeProfile {
    d: usize,
    nodes: Vec<f64>,
    slopes: Vec<f64>,
}

impl SlopeProfile {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// Right-hand slope at every node; the last node gets the left-hand one.
    pub fn node_samples(&self) -> Vec<f64> {
        let mut out = self.slopes.clone();
        out.push(*self.slopes.last().unwrap());
        out
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t < 0.0 || t >= *self.nodes.last().unwrap() {
            return 0.0;
        }
        let k = self.nodes.partition_point(|&x| x <= t) - 1;
        self.slopes[k]
    }

    pub fn abs(&self) -> SlopeProfile {
        SlopeProfile {
            d: self.d,
            nodes: self.nodes.clone(),
            slopes: self.slopes.iter().map(|s| s.abs()).collect(),
        }
    }

    /// `L¹(R^d)` norm of `|f̃'(|x|)|`, integrated exactly per segment.
    pub fn l1_norm(&self) -> f64 {
        let d = self.d as i32;
        let acc: f64 = self
            .nodes
            .windows(2)
            .zip(&self.slopes)
            .map(|(t, s)| s.abs() * (t[1].powi(d) - t[0].powi(d)))
            .sum();
        unit_ball_volume(self.d) * acc
    }
}

/// Norms of one profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormReport {
    pub p: f64,
    pub l1: f64,
    pub lp: f64,
    pub linf: f64,
    pub grad_l1: f64,
    pub w11: f64,
}

impl NormReport {
    pub fn of(f: &RadialProfile, p: f64) -> Result<Self> {
        let l1 = f.l1_norm();
        let grad_l1 = f.grad_l1();
        Ok(Self {
            p,
            l1,
            lp: f.lp_norm(p)?,
            linf: f.max_abs(),
            grad_l1,
            w11: l1 + grad_l1,
        })
    }
}

/// Endpoint exponent `q = d/(d - β)`.
pub fn endpoint_exponent(d: usize, beta: f64) -> f64 {
    d as f64 / (d as f64 - beta)
}

/// Piecewise-linear function on a uniform grid of `[x_min, x_max]`, zero
/// outside.
#[derive(Debug, Clone, PartialEq)]
pub struct LineFunction {
    x_min: f64,
    h: f64,
    values: Vec<f64>,
}

/// Presets for line functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum LineSpec {
    /// `max(0, 1 - |x - center| / a)`.
    Tent { center: f64, a: f64 },
    /// Seeded random values at `n_knots + 1` equispaced knots of
    /// `[left, right]`, zero at both ends.
    RandomPl {
        seed: u64,
        n_knots: usize,
        left: f64,
        right: f64,
    },
}

impl LineFunction {
    pub fn new(x_min: f64, h: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::InvalidProfile(
                "line function needs >= 3 samples".into(),
            ));
        }
        if !(h > 0.0) || !x_min.is_finite() {
            return Err(Error::InvalidGrid("line spacing must be positive".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidProfile("non-finite sample".into()));
        }
        if values[0] != 0.0 || *values.last().unwrap() != 0.0 {
            return Err(Error::InvalidProfile("endpoint samples must be 0".into()));
        }
        Ok(Self { x_min, h, values })
    }

    pub fn from_spec(spec: &LineSpec, x_min: f64, x_max: f64, h: f64) -> Result<Self> {
        let n = ((x_max - x_min) / h).round() as usize;
        if n < 2 || ((x_max - x_min) / h - n as f64).abs() > 1e-6 * n as f64 {
            return Err(Error::InvalidGrid(format!(
                "[{x_min}, {x_max}] is not a multiple of h = {h}"
            )));
        }
        let knots = match spec {
            LineSpec::RandomPl {
                seed,
                n_knots,
                left,
                right,
            } => {
                if *n_knots < 2 || !(left < right) || *left < x_min || *right > x_max {
                    return Err(invalid(
                        "random_pl",
                        "knot interval must lie inside the domain",
                    ));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut v = vec![0.0];
                v.extend((1..*n_knots).map(|_| rng.random_range(-1.0..=1.0)));
                v.push(0.0);
                v
            }
            LineSpec::Tent { center, a } => {
                if !(*a > 0.0) || center - a < x_min || center + a > x_max {
                    return Err(invalid("tent", "support must lie inside the domain"));
                }
                Vec::new()
            }
        };
        let mut values: Vec<f64> = (0..=n)
            .map(|i| {
                let x = x_min + i as f64 * h;
                match spec {
                    LineSpec::Tent { center, a } => (1.0 - (x - center).abs() / a).max(0.0),
                    LineSpec::RandomPl {
                        n_knots,
                        left,
                        right,
                        ..
                    } => {
                        if x <= *left || x >= *right {
                            return 0.0;
                        }
                        let spacing = (right - left) / *n_knots as f64;
                        let k = (((x - left) / spacing).floor() as usize).min(n_knots - 1);
                        let w = (x - left - k as f64 * spacing) / spacing;
                        knots[k] * (1.0 - w) + knots[k + 1] * w
                    }
                }
            })
            .collect();
        values[0] = 0.0;
        values[n] = 0.0;
        Self::new(x_min, h, values)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.node(self.values.len() - 1)
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn node(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.values.len()).map(|i| self.node(i)).collect()
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.x_min || x >= self.x_max() {
            return 0.0;
        }
        let u = (x - self.x_min) / self.h;
        let k = (u.floor() as usize).min(self.values.len() - 2);
        let w = u - k as f64;
        self.values[k] * (1.0 - w) + self.values[k + 1] * w
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| c * v).collect(),
            ..self.clone()
        }
    }

    /// Same function on a grid shifted by `steps` cells.
    pub fn shifted(&self, steps: i64) -> Self {
        Self {
            x_min: self.x_min + steps as f64 * self.h,
            ..self.clone()
        }
    }

    pub fn refined(&self) -> Self {
        let mut values = Vec::with_capacity(2 * self.values.len());
        for w in self.values.windows(2) {
            values.push(w[0]);
            values.push(0.5 * (w[0] + w[1]));
        }
        values.push(0.0);
        Self {
            x_min: self.x_min,
            h: self.h / 2.0,
            values,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Prefix integrals `∫_{x_min}^{x_i} |f|`, exact for piecewise-linear `f`.
    pub fn abs_prefix(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.values.len());
        let mut acc = 0.0;
        out.push(0.0);
        for w in self.values.windows(2) {
            acc += abs_linear_integral(w[0], w[1], self.h);
            out.push(acc);
        }
        out
    }

    pub fn l1_norm(&self) -> f64 {
        *self.abs_prefix().last().unwrap()
    }

    /// `‖f'‖_{L¹(R)}` = total variation.
    pub fn derivative_l1(&self) -> f64 {
        self.values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }
}

/// `∫_0^len |linear from a to b|`.
pub(crate) fn abs_linear_integral(a: f64, b: f64, len: f64) -> f64 {
    if a * b >= 0.0 {
        0.5 * (a.abs() + b.abs()) * len
    } else {
        0.5 * (a * a + b * b) / (a.abs() + b.abs()) * len
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(d: usize, h: f64, t_max: f64) -> RadialGrid {
        RadialGrid::new(d, h, t_max).unwrap()
    }

    #[test]
    fn ball_volumes() {
        assert_relative_eq!(unit_ball_volume(1), 2.0);
        assert_relative_eq!(unit_ball_volume(2), std::f64::consts::PI);
        assert_relative_eq!(unit_ball_volume(3), 4.0 * std::f64::consts::PI / 3.0);
        assert_relative_eq!(sphere_measure(1), 2.0);
    }

    #[test]
    fn tent_profile_nodes() {
        let f = make_profile(&ProfileSpec::Tent { a: 1.0 }, &grid(1, 0.01, 2.0)).unwrap();
        assert_eq!(f.values()[0], 1.0);
        assert!(f.eval(1.0).abs() < 1e-12);
        assert_relative_eq!(f.eval(0.25), 0.75, epsilon = 1e-12);
        assert_eq!(f.eval(1.7), 0.0);
    }

    #[test]
    fn empty_bump_sum_is_zero() {
        let f = make_profile(&ProfileSpec::BumpSum { bumps: vec![] }, &grid(3, 0.1, 1.0)).unwrap();
        assert!(f.is_zero());
        assert_eq!(f.lp_norm(2.0).unwrap(), 0.0);
        assert_eq!(f.lp_norm(f64::INFINITY).unwrap(), 0.0);
    }

    #[test]
    fn random_pl_is_deterministic() {
        let spec = ProfileSpec::RandomPl {
            seed: 7,
            n_knots: 5,
        };
        let g = grid(2, 0.01, 1.0);
        let a = make_profile(&spec, &g).unwrap();
        let b = make_profile(&spec, &g).unwrap();
        assert!(a
            .values()
            .iter()
            .zip(b.values())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        let c = make_profile(
            &ProfileSpec::RandomPl {
                seed: 8,
                n_knots: 5,
            },
            &g,
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn preset_errors() {
        let g = grid(2, 0.1, 1.0);
        assert!(matches!(
            "gaussian(1)".parse::<ProfileSpec>(),
            Err(Error::UnknownPreset(_))
        ));
        assert!(make_profile(&ProfileSpec::Tent { a: 1.5 }, &g).is_err());
        assert!(make_profile(&ProfileSpec::SmoothedIndicator { a: 0.9, ramp: 0.2 }, &g).is_err());
    }

    #[test]
    fn preset_syntax_round_trips() {
        for s in [
            "tent(1)",
            "smoothed_indicator(1, 0.05)",
            "random_pl(7, 5)",
            "quadratic(0.5)",
            "bump_sum((0.5, 0.2, 1), (1.2, 0.3, -0.5))",
            "bump_sum()",
        ] {
            let spec: ProfileSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
    }

    #[test]
    fn tent_norms_d1() {
        let f = make_profile(&ProfileSpec::Tent { a: 1.0 }, &grid(1, 0.01, 2.0)).unwrap();
        // full-line tent: area 1, total variation 2
        assert_relative_eq!(f.lp_norm(1.0).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(f.grad_l1(), 2.0, epsilon = 1e-12);
        let slopes = f.weak_derivative().node_samples();
        assert_relative_eq!(slopes[0], -1.0, epsilon = 1e-9);
        assert_relative_eq!(slopes[150], 0.0);
    }

    #[test]
    fn indicator_l1_is_disk_area() {
        let f = make_profile(
            &ProfileSpec::SmoothedIndicator { a: 1.0, ramp: 0.0 },
            &grid(2, 0.001, 2.0),
        )
        .unwrap();
        // one-cell drop at t = 1 contributes O(h)
        assert_relative_eq!(f.l1_norm(), std::f64::consts::PI, epsilon = 5e-3);
    }

    #[test]
    fn lp_norm_rejects_small_p() {
        let f = make_profile(&ProfileSpec::Tent { a: 1.0 }, &grid(2, 0.1, 1.0)).unwrap();
        assert!(f.lp_norm(0.5).is_err());
    }

    #[test]
    fn grad_l1_refinement_quadratic() {
        let g = grid(2, 0.02, 1.0);
        let spec = ProfileSpec::Quadratic { a: 1.0 };
        let coarse = make_profile(&spec, &g).unwrap().grad_l1();
        let fine = make_profile(&spec, &g.refined()).unwrap().grad_l1();
        // exact: 2π ∫ 2t·t dt = 4π/3
        let exact = 4.0 * std::f64::consts::PI / 3.0;
        assert!((coarse - exact).abs() < 0.05 * g.h);
        assert!((fine - exact).abs() <= (coarse - exact).abs() + 1e-12);
    }

    #[test]
    fn modulus_inserts_sign_change() {
        let f = RadialProfile::new(1, 1.0, vec![0.0, 2.0, 3.0], vec![1.0, -1.0, 0.0]).unwrap();
        let m = f.modulus();
        assert_eq!(m.nodes(), &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(m.values(), &[1.0, 0.0, 1.0, 0.0]);
        assert_eq!(m.modulus(), m);
    }

    #[test]
    fn modulus_of_nonnegative_is_identity() {
        let f = make_profile(&ProfileSpec::Tent { a: 1.0 }, &grid(2, 0.1, 1.0)).unwrap();
        assert_eq!(f.modulus(), f);
    }

    #[test]
    fn modulus_reduces_gradient_mass() {
        let g = grid(2, 0.01, 1.0);
        for seed in 1..=10 {
            let f = make_profile(&ProfileSpec::RandomPl { seed, n_knots: 6 }, &g).unwrap();
            assert!(f.modulus().grad_l1() <= f.grad_l1() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn refinement_preserves_function() {
        let f = make_profile(
            &ProfileSpec::RandomPl {
                seed: 3,
                n_knots: 4,
            },
            &grid(2, 0.05, 1.0),
        )
        .unwrap();
        let r = f.refined();
        for t in [0.0, 0.013, 0.5, 0.77, 0.999] {
            assert_relative_eq!(f.eval(t), r.eval(t), epsilon = 1e-12);
        }
        assert_relative_eq!(f.grad_l1(), r.grad_l1(), epsilon = 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let f = make_profile(
            &ProfileSpec::RandomPl {
                seed: 5,
                n_knots: 4,
            },
            &grid(2, 0.1, 1.0),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        f.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,value\n"));
        let g = RadialProfile::read_csv(&path, 2).unwrap();
        assert_eq!(f.values(), g.values());
    }

    #[test]
    fn line_function_basics() {
        let f = LineFunction::from_spec(
            &LineSpec::Tent {
                center: 0.0,
                a: 1.0,
            },
            -2.0,
            2.0,
            0.01,
        )
        .unwrap();
        assert_relative_eq!(f.l1_norm(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(f.derivative_l1(), 2.0, epsilon = 1e-12);
        assert_relative_eq!(f.eval(0.5), 0.5, epsilon = 1e-12);
        assert_eq!(f.refined().l1_norm(), f.l1_norm());
    }

    #[test]
    fn abs_integral_with_sign_change() {
        // linear from 1 to -1 over length 2: two triangles of area 1/2
        assert_relative_eq!(abs_linear_integral(1.0, -1.0, 2.0), 1.0);
    }
}
