use fracmax::oracle2d::{compare_with_radial, oracle_maximal_2d, rasterize_radial, Grid2D, Ray};
use fracmax::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tent(d: usize, h: f64, t_max: f64) -> RadialProfile {
    make_profile(&ProfileSpec::Tent { a: 1.0 }, &RadialGrid::new(d, h, t_max).unwrap()).unwrap()
}

#[test]
fn directional_average_matches_monte_carlo() {
    let f = tent(2, 0.01, 2.0);
    let g = f.modulus().weak_derivative();
    let ctx = CapKernelContext::new(2).unwrap();
    let (s, r) = (1.0, 0.5);
    let value = directional_ball_average(&g, s, r, &ctx).unwrap();
    assert!(value < 0.0);

    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let n = 1_000_000;
    let mut acc = 0.0;
    let mut hits = 0usize;
    while hits < n {
        let (x, y): (f64, f64) = (rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
        if x * x + y * y > 1.0 {
            continue;
        }
        let (px, py) = (s + r * x, r * y);
        let t = px.hypot(py);
        acc += g.eval(t) * px / t;
        hits += 1;
    }
    let mc = acc / n as f64;
    assert!((value - mc).abs() <= 0.01 * mc.abs(), "{value} vs {mc}");
}

#[test]
fn off_axis_ball_matches_grid_quadrature() {
    let f = ProfileSpec::SmoothedIndicator { a: 0.6, ramp: 0.4 };
    let f = make_profile(&f, &RadialGrid::new(2, 0.02, 2.0).unwrap()).unwrap();
    let ctx = CapKernelContext::new(2).unwrap();
    let h = 0.004;
    for (s, r, phi) in [(0.7_f64, 0.5_f64, 0.6_f64), (0.3, 0.9, 2.1), (1.1, 0.4, -1.0)] {
        let (cx, cy) = (s * f64::cos(phi), s * f64::sin(phi));
        let m = (r / h).ceil() as i64;
        let (mut sum, mut count) = (0.0, 0usize);
        for i in -m..=m {
            for k in -m..=m {
                let (dx, dy) = (i as f64 * h, k as f64 * h);
                if dx * dx + dy * dy <= r * r {
                    sum += f.eval((cx + dx).hypot(cy + dy)).abs();
                    count += 1;
                }
            }
        }
        let grid = sum / count as f64;
        let exact = ball_average(&f, s, r, &ctx).unwrap();
        assert!((exact - grid).abs() <= 0.01 * exact, "(s, r) = ({s}, {r}): {exact} vs {grid}");
    }
}

fn oracle(f: &RadialProfile, beta: f64, h2: f64, half_width: f64, r_max: f64) -> Grid2D {
    let g = rasterize_radial(f, half_width, h2).unwrap();
    let n = (r_max / h2).round() as usize;
    let radii: Vec<f64> = std::iter::once(0.5 * h2).chain((1..=n).map(|k| k as f64 * h2)).collect();
    oracle_maximal_2d(&g, beta, 1, &radii).unwrap()
}

fn coarse_oracle(f: &RadialProfile, beta: f64) -> Grid2D {
    oracle(f, beta, 0.05, 2.0, 4.0)
}

fn interpolate(grid: &[f64], values: &[f64], t: f64) -> f64 {
    let k = grid.partition_point(|&a| a <= t).clamp(1, grid.len() - 1);
    let w = (t - grid[k - 1]) / (grid[k] - grid[k - 1]);
    values[k - 1] * (1.0 - w) + values[k] * w
}

#[test]
fn oracle_dominates_restricted_variants() {
    let f = tent(2, 0.01, 1.5);
    let t = uniform_grid(0.0, 1.8, 0.01);
    for beta in [0.5, 1.5] {
        let oracle = oracle(&f, beta, 0.025, 1.5, 2.0);
        for kind in [VariantKind::InnerOnly, VariantKind::OuterOnly] {
            let radial = maximal_profile(&f, beta, kind, &t).unwrap();
            let scale = radial.max_value();
            for ray in [Ray::Axis, Ray::Diagonal] {
                for (t, v) in ray.samples(&oracle) {
                    let r = interpolate(&radial.eval_grid, &radial.values, t);
                    assert!(v >= r - 0.01 * r.max(1e-3 * scale), "{kind} beta {beta} t {t}: {v} < {r}");
                }
            }
        }
    }
}

#[test]
fn oracle_agrees_with_radial_pipeline() {
    let f = tent(2, 0.01, 1.5);
    let t = uniform_grid(0.0, 1.8, 0.01);
    for beta in [0.5, 1.5] {
        let oracle = coarse_oracle(&f, beta);
        let radial = maximal_profile(&f, beta, VariantKind::Noncentered, &t).unwrap();
        let stats = compare_with_radial(&oracle, &radial, Ray::Axis, 1.8).unwrap();
        assert!(stats.max_rel <= 0.02, "beta {beta}: {stats:?}");
    }
}

#[test]
fn oracle_output_is_radial() {
    let f = tent(2, 0.01, 1.5);
    let oracle = coarse_oracle(&f, 1.5);
    let axis = oracle_axis(&oracle);
    for (t, v) in Ray::Diagonal.samples(&oracle) {
        if t > 1.8 {
            break;
        }
        let k = (t / 0.05).floor() as usize;
        let w = t / 0.05 - k as f64;
        let a = axis[k] * (1.0 - w) + axis[k + 1] * w;
        assert!((v - a).abs() <= 0.02 * a, "t {t}: {v} vs {a}");
    }
}

fn oracle_axis(g: &Grid2D) -> Vec<f64> {
    Ray::Axis.samples(g).into_iter().map(|(_, v)| v).collect()
}

#[test]
fn oracle_monotone_in_beta_on_plateau() {
    let f = make_profile(
        &ProfileSpec::SmoothedIndicator { a: 1.5, ramp: 0.2 },
        &RadialGrid::new(2, 0.05, 2.0).unwrap(),
    )
    .unwrap();
    let g = rasterize_radial(&f, 2.0, 0.1).unwrap();
    let radii = [1.0, 1.2, 1.5];
    let fields: Vec<Grid2D> = [0.0, 0.5, 1.0, 1.5]
        .iter()
        .map(|&b| oracle_maximal_2d(&g, b, 2, &radii).unwrap())
        .collect();
    for w in fields.windows(2) {
        for (a, b) in w[0].samples().iter().zip(w[1].samples()) {
            assert!(b >= a);
        }
    }
}

#[test]
fn line_translation_equivariance() {
    let spec = LineSpec::RandomPl {
        seed: 11,
        n_knots: 6,
        left: -1.0,
        right: 1.0,
    };
    let f = LineFunction::from_spec(&spec, -2.0, 2.0, 0.01).unwrap();
    for centered in [true, false] {
        let a = maximal_1d(&f, 0.4, centered).unwrap();
        let b = maximal_1d(&f.shifted(37), 0.4, centered).unwrap();
        assert_eq!(a.values, b.values);
        for (x, y) in a.eval_grid.iter().zip(&b.eval_grid) {
            assert!((y - x - 0.37).abs() < 1e-9);
        }
    }
}
