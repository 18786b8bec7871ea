use fracmax::convergence::*;
use fracmax::*;

fn profile(spec: &str, d: usize, h: f64, t_max: f64) -> RadialProfile {
    make_profile(&spec.parse().unwrap(), &RadialGrid::new(d, h, t_max).unwrap()).unwrap()
}

fn sequences() -> Vec<SequenceKind> {
    vec![
        SequenceKind::Amplitude { g: "random_pl(4, 6)".parse().unwrap() },
        SequenceKind::Mollify { scale: 0.3 },
        SequenceKind::Translate { delta: 0.3 },
        SequenceKind::NodeJitter { seed: 9 },
    ]
}

#[test]
fn sobolev_constant_and_interpolation() {
    for d in [2usize, 3] {
        let dd = d as f64;
        let f = profile("tent(1)", d, 0.02, 2.0);
        let sharp = 1.0 / (dd * unit_ball_volume(d).powf(1.0 / dd));
        let sobolev = dd / (dd - 1.0);
        for kind in sequences() {
            let seq = make_sequence(&f, &SequenceSpec::new(kind.clone(), 5)).unwrap();
            let diffs: Vec<RadialProfile> = seq.profiles.iter().map(|p| p.sub(&f).unwrap()).collect();
            let c_s = diffs
                .iter()
                .map(|g| g.lp_norm(sobolev).unwrap() / g.grad_l1())
                .fold(0.0, f64::max);
            assert!(c_s <= sharp * 1.01, "d {d} {kind:?}: {c_s} > {sharp}");
            for p in [1.1, 0.5 * (1.0 + sobolev), sobolev - 0.05] {
                let theta = (1.0 - 1.0 / p) * dd;
                for g in &diffs {
                    let lhs = g.lp_norm(p).unwrap();
                    let rhs = g.l1_norm().powf(1.0 - theta) * (c_s * g.grad_l1()).powf(theta);
                    assert!(lhs <= rhs * (1.0 + 1e-9), "d {d} p {p}: {lhs} > {rhs}");
                }
            }
        }
    }
}

#[test]
fn sup_bounded_by_gradient_in_one_dimension() {
    let f = profile("smoothed_indicator(0.8, 0.4)", 1, 0.01, 2.0);
    for kind in sequences() {
        let seq = make_sequence(&f, &SequenceSpec::new(kind, 6)).unwrap();
        for p in &seq.profiles {
            let g = p.sub(&f).unwrap();
            assert!(g.max_abs() <= g.grad_l1() + 1e-12);
        }
    }
}

#[test]
fn convergence_report_is_deterministic() {
    let f = profile("tent(1)", 2, 0.05, 2.0);
    let spec = SequenceSpec::new(SequenceKind::NodeJitter { seed: 5 }, 4);
    let opts = LabOptions::for_profile(&f);
    let a = run_convergence(&f, &spec, 0.5, VariantKind::Noncentered, &opts).unwrap();
    let b = run_convergence(&f, &spec, 0.5, VariantKind::Noncentered, &opts).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.sample_t.len(), SAMPLE_POINTS);
}

#[test]
fn amplitude_sequence_converges_consistently() {
    let f = profile("tent(1)", 2, 0.05, 3.0);
    let spec = SequenceSpec::new(SequenceKind::Amplitude { g: "tent(0.5)".parse().unwrap() }, 6);
    let opts = LabOptions::for_profile(&f);
    let rep = run_convergence(&f, &spec, 0.5, VariantKind::Noncentered, &opts).unwrap();
    assert!(rep.converges, "{rep}");
    let bl = brezis_lieb_diagnostic(&rep);
    assert!(bl.consistent, "{bl}");
    let tails = tail_smallness(&f, &spec, 0.5, VariantKind::Noncentered, &[0.2, 0.4, 0.6], 1e-3, &opts).unwrap();
    assert!(tails.monotone_in_k);
}

#[test]
fn w11_distances_decay_at_the_sequence_rate() {
    let f = profile("quadratic(1)", 2, 0.01, 2.0);
    for kind in sequences() {
        let seq = make_sequence(&f, &SequenceSpec::new(kind.clone(), 8)).unwrap();
        let first = seq.w11_dist[0];
        for (j, w) in seq.w11_dist.iter().enumerate() {
            assert!(*w <= 4.0 * 0.5_f64.powi(j as i32) * first, "{kind:?} j {j}");
        }
    }
}
