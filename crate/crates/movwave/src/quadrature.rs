//! Gauss–Legendre rules and composite integration helpers.

use std::sync::{Arc, Mutex, OnceLock};

use crate::scalar::Real;

/// Nodes and weights of an n-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

type RuleCache = Vec<(usize, Arc<GaussLegendre>)>;

impl GaussLegendre {
    /// Newton iteration on the three-term recurrence; nodes accurate to a few ulps.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Shared cached rule.
    pub fn cached(n: usize) -> Arc<GaussLegendre> {
        static CACHE: OnceLock<Mutex<RuleCache>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(Vec::new()));
        let mut guard = cache.lock().expect("quadrature cache poisoned");
        if let Some((_, r)) = guard.iter().find(|(m, _)| *m == n) {
            return r.clone();
        }
        let rule = Arc::new(GaussLegendre::new(n));
        guard.push((n, rule.clone()));
        rule
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Points per panel used by [`composite_nodes`].
pub const PANEL_ORDER: usize = 16;

/// Nodes and weights of a composite rule with `total` nodes spread over equal
/// panels of [`PANEL_ORDER`] points each. Breakpoints, if any, are honoured as
/// panel edges and the node budget is split in proportion to sub-interval length.
pub fn composite_nodes<T: Real>(a: T, b: T, total: usize, breaks: &[T]) -> Vec<(T, T)> {
    let mut edges = vec![a];
    let mut inner: Vec<T> = breaks.iter().copied().filter(|&p| p > a && p < b).collect();
    inner.sort_by(|p, q| p.partial_cmp(q).expect("finite breakpoints"));
    edges.extend(inner);
    edges.push(b);
    let order = PANEL_ORDER.min(total.max(1));
    let rule = GaussLegendre::cached(order);
    let panels_total = (total / order).max(1);
    let len = b - a;
    let mut out = Vec::with_capacity(total + order * edges.len());
    for win in edges.windows(2) {
        let (lo, hi) = (win[0], win[1]);
        if hi <= lo {
            continue;
        }
        let share = ((hi - lo) / len).to_f64_lossy();
        let panels = ((panels_total as f64 * share).ceil() as usize).max(1);
        let h = (hi - lo) / T::of(panels);
        for p in 0..panels {
            let pa = lo + h * T::of(p);
            let half = h / T::lit(2.0);
            let mid = pa + half;
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                out.push((mid + half * T::lit(*x), half * T::lit(*w)));
            }
        }
    }
    out
}

/// Composite Gauss–Legendre integral of `f` over [a, b].
pub fn integrate<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, total: usize, breaks: &[T]) -> T {
    composite_nodes(a, b, total, breaks).into_iter().map(|(x, w)| w * f(x)).sum()
}

/// Outcome of [`integrate_until_stable`].
#[derive(Debug, Clone, Copy)]
pub struct StableIntegral<T> {
    pub value: T,
    pub nodes: usize,
    pub change: T,
}

/// Doubles the node count starting at `n0` until successive values differ by
/// at most `tol`, or `max_nodes` is reached.
pub fn integrate_until_stable<T: Real, F: Fn(T) -> T>(
    f: F,
    a: T,
    b: T,
    n0: usize,
    max_nodes: usize,
    tol: T,
    breaks: &[T],
) -> StableIntegral<T> {
    let mut n = n0.max(PANEL_ORDER);
    let mut prev = integrate(&f, a, b, n, breaks);
    loop {
        let next_n = n * 2;
        if next_n > max_nodes {
            return StableIntegral { value: prev, nodes: n, change: T::infinity() };
        }
        let next = integrate(&f, a, b, next_n, breaks);
        let change = (next - prev).abs();
        if change <= tol {
            return StableIntegral { value: next, nodes: next_n, change };
        }
        prev = next;
        n = next_n;
    }
}

/// Trapezoid weights for `n` uniform nodes spaced `h` apart.
pub fn trapezoid_weights<T: Real>(n: usize, h: T) -> Vec<T> {
    let mut w = vec![h; n];
    if n > 0 {
        w[0] = h / T::lit(2.0);
        w[n - 1] = h / T::lit(2.0);
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let r = GaussLegendre::new(8);
        for k in 0..16 {
            let s: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(k)).sum();
            let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            assert!((s - exact).abs() < 1e-14, "k={k}: {s} vs {exact}");
        }
    }

    #[test]
    fn weights_sum_to_two_for_large_rules() {
        for n in [1, 2, 16, 64, 257] {
            let r = GaussLegendre::new(n);
            let s: f64 = r.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n}: {s}");
        }
    }

    #[test]
    fn composite_respects_breakpoints() {
        // |x - 0.3| has a kink; splitting there makes the rule exact.
        let v = integrate(|x: f64| (x - 0.3).abs(), 0.0, 1.0, 32, &[0.3]);
        assert!((v - (0.045 + 0.245)).abs() < 1e-15);
    }

    #[test]
    fn stable_integration_of_oscillatory_function() {
        let r = integrate_until_stable(|x: f64| (40.0 * x).cos(), 0.0, 2.0, 16, 1 << 14, 1e-13, &[]);
        assert!((r.value - (80.0f64).sin() / 40.0).abs() < 1e-12);
    }
}
