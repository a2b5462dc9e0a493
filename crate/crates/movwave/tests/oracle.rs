use std::sync::Arc;

use movwave::energy::energy_report;
use movwave::oracle::{reflection_bound, Family};
use movwave::presets::data_from_series;
use movwave::*;

fn g1() -> Geometry64 {
    DomainGeometry::new(0.1, 0.3, 1.0).unwrap()
}

fn grid(g: &Geometry64, t_end: f64, nt: usize, nx: usize) -> Vec<(f64, f64)> {
    let mut pts = Vec::with_capacity(nt * nx);
    for i in 0..nt {
        let t = g.t0 + (t_end - g.t0) * i as f64 / (nt - 1) as f64;
        let (a, b) = g.interval_at(t).unwrap();
        for j in 0..nx {
            pts.push((a + (b - a) * j as f64 / (nx - 1) as f64, t));
        }
    }
    pts
}

fn sine6(g: &Geometry64, velocity: f64) -> InitialData64 {
    Preset::SineBump { amplitude: 1.0, power: 6, velocity }.build(g).unwrap()
}

#[test]
fn oracle_matches_series() {
    let g = g1();
    let d = sine6(&g, 0.0);
    let c = compute_coefficients(&extend(&g, &d), 64, &CoefficientOptions::default()).unwrap().coefficients;
    let pts = grid(&g, 3.0 * g.t0, 64, 64);
    let series = c.evaluate_field(&pts).unwrap();
    let oracle = Oracle::new(&g, &d, 4096).unwrap().solve_homogeneous(&pts).unwrap();
    let diff = series.max_abs_difference(&oracle);
    assert!(diff < 1e-6, "max difference {diff:e}");
}

#[test]
fn oracle_reproduces_a_pure_series_state() {
    let g = g1();
    let c = movwave::presets::random_mode_coefficients(&g, 3, 11, 1.0).unwrap();
    let o = Oracle::new(&g, &data_from_series(&c), 4096).unwrap();
    let pts = grid(&g, 6.0 * g.t0, 24, 24);
    let a = c.evaluate_field(&pts).unwrap();
    let b = o.solve_homogeneous(&pts).unwrap();
    for (s, r) in a.samples.iter().zip(&b.samples) {
        assert!((s.phi - r.phi).abs() < 1e-7, "{s:?} {r:?}");
        assert!((s.phi_x - r.phi_x).abs() < 1e-5 && (s.phi_t - r.phi_t).abs() < 1e-5, "{s:?} {r:?}");
    }
}

#[test]
fn dalembert_without_reflections() {
    let g = g1();
    let l = g.l0;
    let a0 = -g.ell1 * g.t0;
    let p0 = move |x: f64| ((x - a0) * (a0 + l - x)).powi(2);
    let p0x = move |x: f64| 2.0 * (x - a0) * (a0 + l - x) * (a0 + l - 2.0 * (x - a0) - a0);
    let p1 = move |x: f64| (x - a0).powi(2);
    let d = InitialData::new(&g, Arc::new(p0), Arc::new(p1), Some(Arc::new(p0x))).unwrap();
    let o = Oracle::new(&g, &d, 4096).unwrap();
    let big = move |x: f64| (x - a0).powi(3) / 3.0;
    // Points in the central diamond where neither characteristic reaches a wall.
    for &(x, s) in &[(0.2, 0.05), (0.3, 0.1), (0.15, 0.02)] {
        let t = g.t0 + s;
        let (rp, rm) = o.trace_rays(x, t).unwrap();
        assert!(rp.reflections.is_empty() && rm.reflections.is_empty());
        let expected = 0.5 * (p0(x + s) + p0(x - s)) + 0.5 * (big(x + s) - big(x - s));
        let got = o.evaluate(x, t, &Controls::none()).unwrap().phi;
        assert!((got - expected).abs() < 1e-10, "x={x} s={s}: {got} vs {expected}");
    }
}

#[test]
fn dirichlet_walls_hold() {
    let g = g1();
    let o = Oracle::new(&g, &sine6(&g, 0.4), 4096).unwrap();
    for k in 0..50 {
        let t = g.t0 * (1.0 + 0.37 * k as f64);
        let (a, b) = g.interval_at(t).unwrap();
        for x in [a, b] {
            let p = o.evaluate(x, t, &Controls::none()).unwrap().phi;
            assert!(p.abs() < 1e-9, "t={t} x={x}: {p}");
        }
    }
}

#[test]
fn linearity_in_data() {
    let g = g1();
    let d1 = sine6(&g, 0.2);
    let d2 = Preset::CompactBump { amplitude: 1.0, center: 0.4, width: 0.3 }.build(&g).unwrap();
    let mix = d1.combine(2.0, &d2, -0.5);
    let pts = grid(&g, 2.0 * g.t0, 12, 12);
    let f1 = Oracle::new(&g, &d1, 4096).unwrap().solve_homogeneous(&pts).unwrap();
    let f2 = Oracle::new(&g, &d2, 4096).unwrap().solve_homogeneous(&pts).unwrap();
    let fm = Oracle::new(&g, &mix, 4096).unwrap().solve_homogeneous(&pts).unwrap();
    for ((a, b), m) in f1.samples.iter().zip(&f2.samples).zip(&fm.samples) {
        assert!((2.0 * a.phi - 0.5 * b.phi - m.phi).abs() < 1e-9);
    }
}

#[test]
fn backward_solve_inverts_forward_solve() {
    let g = g1();
    let d = sine6(&g, 0.3);
    let o = Arc::new(Oracle::new(&g, &d, 4096).unwrap());
    let t1 = 2.2 * g.t0;
    let (o0, o1) = (o.clone(), o.clone());
    let terminal = InitialData::on_interval(
        g.interval_at(t1).unwrap(),
        Arc::new(move |x| o0.evaluate(x, t1, &Controls::none()).unwrap().phi),
        Arc::new(move |x| o1.evaluate(x, t1, &Controls::none()).unwrap().phi_t),
        None,
    );
    let (a, b) = g.initial_interval();
    let pts: Vec<(f64, f64)> = (0..=40).map(|i| (a + (b - a) * i as f64 / 40.0, g.t0)).collect();
    let back = solve_backward(&g, t1, &terminal, &Controls::none(), &pts, 4096).unwrap();
    for s in &back.samples {
        assert!((s.phi - d.phi0(s.x)).abs() < 1e-6, "{s:?}");
        assert!((s.phi_t - d.phi1(s.x)).abs() < 1e-4, "{s:?}");
    }
}

#[test]
fn zero_control_equals_homogeneous() {
    let g = g1();
    let o = Oracle::new(&g, &sine6(&g, 0.0), 1024).unwrap();
    let z = ControlFunction::zero(Side::Right, g.t0, 4.0 * g.t0, 33).unwrap();
    let zl = ControlFunction::zero(Side::Left, g.t0, 4.0 * g.t0, 33).unwrap();
    let pts = grid(&g, 4.0 * g.t0, 10, 10);
    let h = o.solve_homogeneous(&pts).unwrap();
    let c = o.solve_boundary_forced(&Controls { left: Some(&zl), right: Some(&z) }, &pts).unwrap();
    assert_eq!(h.max_abs_difference(&c), 0.0);
}

#[test]
fn boundary_data_are_attained() {
    let g = g1();
    let d = InitialData::zero(&g);
    let o = Oracle::new(&g, &d, 256).unwrap();
    let t0 = g.t0;
    let v = ControlFunction::analytic(
        Side::Right,
        t0,
        5.0 * t0,
        64,
        Arc::new(move |t: f64| (t - t0).powi(2) * (2.0 * (t - t0)).sin()),
        Arc::new(move |t: f64| {
            2.0 * (t - t0) * (2.0 * (t - t0)).sin() + 2.0 * (t - t0).powi(2) * (2.0 * (t - t0)).cos()
        }),
    )
    .unwrap();
    let vl = ControlFunction::sample(Side::Left, t0, 5.0 * t0, 400, |t| ((t - t0) * 0.7).powi(2)).unwrap();
    let ctl = Controls { left: Some(&vl), right: Some(&v) };
    for k in 1..40 {
        let t = t0 + 4.0 * t0 * k as f64 / 40.0;
        let (a, b) = g.interval_at(t).unwrap();
        let r = o.evaluate(b, t, &ctl).unwrap().phi;
        let l = o.evaluate(a, t, &ctl).unwrap().phi;
        assert!((r - v.value(t)).abs() < 1e-10, "right at t={t}: {r} vs {}", v.value(t));
        assert!((l - vl.value(t)).abs() < 1e-10, "left at t={t}: {l} vs {}", vl.value(t));
    }
}

#[test]
fn finite_propagation_speed() {
    let g = g1();
    let d = Preset::CompactBump { amplitude: 1.0, center: 0.5, width: 0.2 }.build(&g).unwrap();
    let o = Oracle::new(&g, &d, 4096).unwrap();
    let (a, b) = g.initial_interval();
    let (lo, hi) = (a + 0.4 * (b - a), a + 0.6 * (b - a));
    for i in 0..20 {
        let s = 0.02 * i as f64;
        let t = g.t0 + s;
        let (ia, ib) = g.interval_at(t).unwrap();
        for j in 0..=50 {
            let x = ia + (ib - ia) * j as f64 / 50.0;
            if x < lo - s - 1e-9 || x > hi + s + 1e-9 {
                let p = o.evaluate(x, t, &Controls::none()).unwrap().phi;
                assert!(p.abs() < 1e-12, "x={x} t={t}: {p}");
            }
        }
    }
}

#[test]
fn oracle_energy_matches_series_energy() {
    let g = g1();
    let d = sine6(&g, 0.0);
    let c = compute_coefficients(&extend(&g, &d), 64, &CoefficientOptions::default()).unwrap().coefficients;
    let o = Oracle::new(&g, &d, 4096).unwrap();
    for t in [g.t0, 1.7 * g.t0, 3.0 * g.t0] {
        let e_series = energy_report(&c, t, 512).unwrap().energy;
        let e_oracle = o.energy(t, &Controls::none(), 64, 1e-10).unwrap();
        assert!(((e_series - e_oracle) / e_series).abs() < 1e-5, "t={t}: {e_series} vs {e_oracle}");
    }
}

#[test]
fn rays_and_bounds() {
    let g = g1();
    let o = Oracle::new(&g, &InitialData::zero(&g), 64).unwrap();
    let t = 40.0 * g.t0;
    let (rp, rm) = o.trace_rays(0.0, t).unwrap();
    assert_eq!(rp.family, Family::Plus);
    assert!(rp.reflections.len() <= reflection_bound(&g, t));
    assert!(rm.reflections.len() <= reflection_bound(&g, t));
    for w in rp.reflections.windows(2) {
        assert!(w[1].time < w[0].time && w[0].side != w[1].side);
    }
    let json = serde_json::to_string(&rp).unwrap();
    assert!(json.contains("\"reflections\""));
    assert!(o.evaluate(0.0, 0.5 * g.t0, &Controls::none()).is_err());
    assert!(o.evaluate(10.0, 2.0 * g.t0, &Controls::none()).is_err());
}

#[test]
fn pure_reflection_case() {
    let g = DomainGeometry::new(0.0, 0.3, 1.0).unwrap();
    let o = Oracle::new(&g, &sine6(&g, 0.0), 4096).unwrap();
    for k in 1..30 {
        let t = g.t0 * (1.0 + 0.2 * k as f64);
        assert!(o.evaluate(0.0, t, &Controls::none()).unwrap().phi.abs() < 1e-9);
    }
}
