//! Executes one configured experiment and writes its artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use fracmax::convergence::{
    brezis_lieb_diagnostic, conjecture_probe_1d, modulus_convergence_check, random_line_corpus, run_convergence,
    tail_smallness, uniform_convergence_check, LabOptions, SAMPLE_SEED,
};
use fracmax::derivative::{
    check_ball_geometry, check_inner_ball, check_kinnunen, check_ks, check_majorants, check_refined_ks,
    relative_drift, GradientPair,
};
use fracmax::oracle2d::{compare_with_radial, oracle_maximal_2d, rasterize_radial, Ray};
use fracmax::{good_radius_stats, make_profile, maximal_profile, uniform_grid, RadialGrid, RadialProfile, VariantKind};
use sha2::{Digest, Sha256};

use crate::config::{ConfigError, Experiment, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Core(#[from] fracmax::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// 2 for bad input, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        use fracmax::Error as E;
        match self {
            RunError::Config(_) => 2,
            RunError::Core(E::Io(_) | E::Csv(_) | E::Cache(_)) => 1,
            RunError::Core(_) => 2,
            RunError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutcome {
    pub summary: Vec<String>,
    pub flagged: bool,
    pub files: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.flagged {
            3
        } else {
            0
        }
    }
}

type Writer = Box<dyn FnOnce(&Path) -> fracmax::Result<()>>;

/// Results collected during the run; files are written after all the
/// computation is done.
struct Collector {
    summary: Vec<String>,
    flagged: bool,
    artifacts: Vec<(String, Writer)>,
}

impl Collector {
    fn new() -> Self {
        Self {
            summary: Vec::new(),
            flagged: false,
            artifacts: Vec::new(),
        }
    }

    fn line(&mut self, s: impl Into<String>) {
        self.summary.push(s.into());
    }

    fn check(&mut self, ok: bool, s: impl Into<String>) {
        let s = s.into();
        self.summary.push(format!("{} {s}", if ok { "ok     " } else { "FLAGGED" }));
        self.flagged |= !ok;
    }

    fn file(&mut self, name: &str, w: impl FnOnce(&Path) -> fracmax::Result<()> + 'static) {
        self.artifacts.push((name.to_string(), Box::new(w)));
    }
}

fn profile(c: &RunConfig) -> fracmax::Result<RadialProfile> {
    make_profile(&c.function, &RadialGrid::new(c.d, c.grid.h, c.grid.t_max)?)
}

fn eval_grid(c: &RunConfig) -> Vec<f64> {
    let [a, b] = c.eval_range();
    uniform_grid(a, b, c.eval_step())
}

fn lab_options(c: &RunConfig) -> LabOptions {
    let [_, end] = c.eval_range();
    LabOptions {
        eval_max: end,
        step: c.eval_step(),
        tail_radius: c.tail.as_ref().map_or(end / 6.0, |t| t.k_radii[0]),
        sample_seed: c.seed.unwrap_or(SAMPLE_SEED),
    }
}

/// Runs `config` and writes every artifact plus `manifest.txt` into `out`.
pub fn run_config(config: &RunConfig, out: &Path) -> Result<RunOutcome, RunError> {
    let experiment = config.experiment.expect("validated config names its experiment");
    let mut col = Collector::new();
    match experiment {
        Experiment::Maximal => maximal(config, &mut col)?,
        Experiment::DerivativeCheck => derivative_check(config, &mut col)?,
        Experiment::Inequalities => inequalities(config, &mut col)?,
        Experiment::Converge => converge(config, &mut col)?,
        Experiment::Tail => tail(config, &mut col)?,
        Experiment::Uniform => uniform(config, &mut col)?,
        Experiment::Probe1d => probe(config, &mut col)?,
        Experiment::OracleCompare => oracle(config, &mut col)?,
    }

    fs::create_dir_all(out)?;
    let mut files = Vec::new();
    let mut hashes = Vec::new();
    for (name, write) in col.artifacts {
        let path = out.join(&name);
        write(&path)?;
        let digest = Sha256::digest(fs::read(&path)?);
        hashes.push(format!("{}  {name}", hex::encode(digest)));
        files.push(path);
    }
    let mut resolved = config.clone();
    resolved.output = None;
    resolved.grid.eval = Some(config.eval_range());
    resolved.grid.eval_step = Some(config.eval_step());
    let mut manifest = format!(
        "fracmax {}\nexperiment {experiment}\n\n[config]\n{}\n\n[outputs]\n",
        env!("CARGO_PKG_VERSION"),
        resolved.to_pretty_json()
    );
    for h in &hashes {
        manifest.push_str(h);
        manifest.push('\n');
    }
    manifest.push_str("\n[summary]\n");
    for s in &col.summary {
        manifest.push_str(s);
        manifest.push('\n');
    }
    let manifest_path = out.join("manifest.txt");
    fs::write(&manifest_path, manifest)?;
    files.push(manifest_path);
    Ok(RunOutcome {
        summary: col.summary,
        flagged: col.flagged,
        files,
    })
}

fn maximal(c: &RunConfig, col: &mut Collector) -> Result<(), RunError> {
    let f = profile(c)?;
    let m = maximal_profile(&f, c.beta, c.variant, &eval_grid(c))?;
    let stats = good_radius_stats(&m);
    col.line(format!(
        "maximal[{}, d={}, beta={}]: points={} max={:.6} r_median={} zero_radius={}",
        c.variant,
        c.d,
        c.beta,
        m.values.len(),
        m.max_value(),
        stats.r_median.map_or("none".into(), |r| format!("{r:.4}")),
        stats.zero_radius_points
    ));
    col.file("maximal.csv", move |p| m.write_csv(p));
    Ok(())
}

fn derivative_check(c: &RunConfig, col: &mut Collector) -> Result<(), RunError> {
    let f = profile(c)?;
    let m = maximal_profile(&f, c.beta, c.variant, &eval_grid(c))?;
    let pair = GradientPair::new(&f, &m)?;
    let tol = c.tolerances.luiro_median;
    match pair.median_relative_error() {
        Some(e) => col.check(
            e <= tol,
            format!("luiro[{}, beta={}]: masked={} median_rel={e:.4} (tol {tol})", c.variant, c.beta, pair.masked()),
        ),
        None => col.check(false, "luiro: no masked points to compare"),
    }
    if c.variant != VariantKind::Centered {
        let geo = check_ball_geometry(&m, &pair);
        col.check(geo.violations() == 0, geo.to_string());
    }
    col.file("gradient.csv", move |p| pair.write_csv(p));
    Ok(())
}

fn inequalities(c: &RunConfig, col: &mut Collector) -> Result<(), RunError> {
    let f = profile(c)?;
    let fine = f.refined();
    let t = eval_grid(c);
    let t_fine = uniform_grid(t[0], *t.last().unwrap(), 0.5 * c.eval_step());
    let tol = &c.tolerances;

    let kin = check_kinnunen(&f, &t)?;
    col.check(kin.max <= tol.kinnunen_bound, format!("{kin}"));
    col.file("kinnunen.csv", move |p| kin.write_csv(p));

    if c.d >= 2 && c.beta >= 1.0 {
        let ks = check_ks(&f, c.beta, c.variant, &t)?;
        let ks_fine = check_ks(&fine, c.beta, c.variant, &t_fine)?;
        let drift = relative_drift(ks.max, ks_fine.max);
        col.check(
            ks.max.is_finite() && drift <= tol.drift,
            format!("{ks} | refined max={:.4} drift={drift:.4}", ks_fine.max),
        );
        col.file("ks.csv", move |p| ks.write_csv(p));
    }

    let m = maximal_profile(&f, c.beta, VariantKind::Noncentered, &t)?;
    if c.beta < 1.0 {
        let rks = check_refined_ks(&f, &m)?;
        let m_fine = maximal_profile(&fine, c.beta, VariantKind::Noncentered, &t_fine)?;
        let rks_fine = check_refined_ks(&fine, &m_fine)?;
        let drift = relative_drift(rks.max, rks_fine.max);
        col.check(
            rks.max.is_finite() && drift <= tol.drift,
            format!("{rks} | refined max={:.4} drift={drift:.4}", rks_fine.max),
        );
        col.file("refined_ks.csv", move |p| rks.write_csv(p));
    }

    let inner = check_inner_ball(&f, &m)?;
    col.check(
        inner.ratios.violations == 0 && inner.weight_violations == 0,
        format!("{} weight_violations={}", inner.ratios, inner.weight_violations),
    );
    let pair = GradientPair::new(&f, &m)?;
    let geo = check_ball_geometry(&m, &pair);
    col.check(geo.violations() == 0, geo.to_string());
    col.file("inner_ball.csv", move |p| inner.ratios.write_csv(p));

    if c.d >= 2 {
        let maj = check_majorants(&f, 4)?;
        col.check(
            maj.u_error() <= tol.majorant && maj.v_error() <= tol.majorant,
            format!(
                "majorants: |u|_1={:.6} expected {:.6} (err {:.2e}); |v|_1={:.6} expected {:.6} (err {:.2e})",
                maj.u_l1,
                maj.u_expected,
                maj.u_error(),
                maj.v_l1,
                maj.v_expected,
                maj.v_error()
            ),
        );
    }
    Ok(())
}

fn converge(c: &RunConfig, col: &mut Collector) -> Result<(), RunError> {
    let f = profile(c)?;
    let spec = c.sequence.as_ref().expect("validated");
    let rep = run_convergence(&f, spec, c.beta, c.variant, &lab_options(c))?;
    let bl = brezis_lieb_diagnostic(&rep);
    let final_ok = rep.final_fraction() <= c.tolerances.convergence_final;
    col.check(rep.decreasing && final_ok, rep.to_string());
    col.check(bl.consistent, bl.to_string());
    let modulus = modulus_convergence_check(&f, spec)?;
    col.check(modulus.converges, modulus.to_string());
    let long = rep.clone();
    col.file("convergence.csv", move |p| rep.write_csv(p));
    col.file("convergence_long.csv", move |p| long.write_long_csv(p));
    Ok(())
}

fn tail(c: &RunConfig, col: &mut Collector) -> Result<(), RunError> {
    let f = profile(c)?;
    let spec = c.sequence.as_ref().expect("validated");
    let cfg = c.tail.as_ref().expect("validated");
    let rep = tail_smallness(&f, spec, c.beta, c.variant, &cfg.k_radii, cfg.eps, &lab_options(c))?;
    col.check(rep.monotone_in_k && rep.uniform_after_j_eps, rep.to_string());
    col.file("tail.csv", move |p| {
        let mut rows = Vec::new();
        for (k, masses) in rep.k_radii.iter().zip(&rep.mass) {
            for (j, m) in masses.iter().enumerate() {
                rows.push(vec![*k, (j + 1) as f64, *m]);
            }
        }
        fracmax::csvio::write_rows(p, &["k", "j", "mass"], rows)
    });
    Ok(())
}

fn uniform(c: &RunConfig, col: &mut Collector) -> Result<(), RunError> {
    let f = profile(c)?;
    let spec = c.sequence.as_ref().expect("validated");
    let rep = uniform_convergence_check(&f, spec, c.beta, &lab_options(c))?;
    col.check(rep.violations == 0, rep.to_string());
    col.file("uniform.csv", move |p| {
        let rows = (0..rep.sup_dist.len()).map(|j| vec![(j + 1) as f64, rep.sup_dist[j], rep.bound[j]]);
        fracmax::csvio::write_rows(p, &["j", "sup_dist", "bound"], rows)
    });
    Ok(())
}

fn probe(c: &RunConfig, col: &mut Collector) -> Result<(), RunError> {
    let cfg = c.probe.clone().unwrap_or(crate::config::ProbeConfig {
        count: 20,
        range: [-3.0, 3.0],
        h: None,
    });
    let seed = c.seed.expect("validated");
    let corpus = random_line_corpus(cfg.count, seed, cfg.range[0], cfg.range[1], cfg.h.unwrap_or(c.grid.h))?;
    let rep = conjecture_probe_1d(&corpus, c.beta)?;
    col.line(rep.to_string());
    col.check(
        rep.max_ratio.is_finite() && rep.max_drift <= c.tolerances.drift,
        format!("probe numerics: finite ratios, refinement drift {:.4} (tol {})", rep.max_drift, c.tolerances.drift),
    );
    col.file("probe.csv", move |p| rep.write_csv(p));
    Ok(())
}

fn oracle(c: &RunConfig, col: &mut Collector) -> Result<(), RunError> {
    let f = profile(c)?;
    let cfg = c.oracle.as_ref().expect("validated");
    let g = rasterize_radial(&f, cfg.half_width, cfg.h2)?;
    let n = (cfg.r_max / cfg.h2).floor() as usize;
    let radii: Vec<f64> = std::iter::once(0.5 * cfg.h2)
        .chain((1..=n).map(|k| k as f64 * cfg.h2))
        .collect();
    let field = oracle_maximal_2d(&g, c.beta, cfg.stride, &radii)?;
    let m = maximal_profile(&f, c.beta, VariantKind::Noncentered, &eval_grid(c))?;
    let [_, end] = c.eval_range();
    let stats = compare_with_radial(&field, &m, Ray::Axis, end.min(cfg.half_width))?;
    col.check(
        stats.max_rel <= c.tolerances.oracle_gap,
        format!(
            "oracle[beta={}, h2={}, stride={}]: points={} max_rel={:.4} at t={:.3} median_rel={:.4}",
            c.beta, cfg.h2, cfg.stride, stats.points, stats.max_rel, stats.argmax_t, stats.median_rel
        ),
    );
    col.file("oracle.csv", move |p| field.write_csv(p));
    col.file("maximal.csv", move |p| m.write_csv(p));
    Ok(())
}
