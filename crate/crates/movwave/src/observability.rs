//! Boundary-trace identities, observability constants and the
//! counterexamples below the sharp times.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};
use crate::geometry::{DomainGeometry, Side};
use crate::quadrature::{composite_nodes, PANEL_ORDER};
use crate::scalar::Real;
use crate::spectral::SpectralCoefficients;

/// Observation at one endpoint (the right one unless stated) or at both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointMode {
    OneEndpoint,
    TwoEndpoint,
}

/// One weighted trace integral `weight * int t phi_x^2 dt` over `window`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePart<T> {
    pub side: Side,
    pub window: (T, T),
    pub weight: T,
    pub integral: T,
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceIdentityReport<T> {
    pub mode: EndpointMode,
    #[serde(rename = "M")]
    pub m: usize,
    pub lhs: T,
    pub rhs: T,
    pub residual: T,
    pub parts: Vec<TracePart<T>>,
}

impl<T: Real> TraceIdentityReport<T> {
    /// `|lhs - rhs| / rhs`, or the absolute residual when `rhs = 0`.
    pub fn relative_residual(&self) -> T {
        if self.rhs == T::zero() {
            self.residual
        } else {
            self.residual / self.rhs
        }
    }
}

const MAX_TRACE_NODES: usize = 1 << 22;

/// `int_{t0}^{t1} t * trace(t)^2 dt` in the variable `s = log t`, split at
/// the multiplicative periods, doubling the node count from `n0` until the
/// relative change is below `1e-13`.
fn weighted_trace_integral<T: Real>(c: &SpectralCoefficients<T>, side: Side, t1: T, n0: usize) -> (T, usize) {
    let g = c.geometry();
    let (a, b) = (g.t0.ln(), t1.ln());
    let period = g.alpha_beta().ln();
    let mut breaks = Vec::new();
    let mut s = a + period;
    while s < b {
        breaks.push(s);
        s = s + period;
    }
    let eval = |n: usize| -> T {
        composite_nodes(a, b, n, &breaks)
            .par_iter()
            .map(|&(s, w)| {
                let t = s.exp();
                let tr = c.boundary_trace(side, t);
                w * t * t * tr * tr
            })
            .collect::<Vec<T>>()
            .into_iter()
            .sum()
    };
    let mut n = n0.max(PANEL_ORDER) * (breaks.len() + 1);
    let mut prev = eval(n);
    while n * 2 <= MAX_TRACE_NODES {
        let next = eval(n * 2);
        n *= 2;
        let done = (next - prev).abs() <= T::lit(1e-13) * next.abs().max(T::min_positive_value());
        prev = next;
        if done {
            break;
        }
    }
    (prev, n)
}

fn check_m(m: usize) -> Result<()> {
    if m == 0 {
        return Err(WaveError::InvalidArgument("window exponent M must be at least 1".into()));
    }
    Ok(())
}

/// `int_{t0}^{(alpha beta)^M t0} t phi_x^2 dt` at one endpoint against
/// `4 M S / (1 - ell^2)^2`.
pub fn one_endpoint_identity<T: Real>(
    c: &SpectralCoefficients<T>,
    side: Side,
    m: usize,
    quad_n: usize,
) -> Result<TraceIdentityReport<T>> {
    check_m(m)?;
    let g = c.geometry();
    let ell = g.speed(side);
    let t1 = g.t0 * g.alpha_beta().powi(m as i32);
    let (integral, nodes) = weighted_trace_integral(c, side, t1, quad_n);
    let q = T::one() - ell * ell;
    let rhs = T::lit(4.0) * T::of(m) * c.s_invariant() / (q * q);
    Ok(TraceIdentityReport {
        mode: EndpointMode::OneEndpoint,
        m,
        lhs: integral,
        rhs,
        residual: (integral - rhs).abs(),
        parts: vec![TracePart { side, window: (g.t0, t1), weight: T::one(), integral, nodes }],
    })
}

/// `(1-ell1^2)^2 int_{t0}^{beta^M t0} t phi_x^2(-ell1 t) dt
///  + (1-ell2^2)^2 int_{t0}^{alpha^M t0} t phi_x^2(ell2 t) dt` against `4 M S`.
pub fn two_endpoint_identity<T: Real>(
    c: &SpectralCoefficients<T>,
    m: usize,
    quad_n: usize,
) -> Result<TraceIdentityReport<T>> {
    check_m(m)?;
    let g = c.geometry();
    let one = T::one();
    let parts: Vec<TracePart<T>> = [(Side::Left, g.beta), (Side::Right, g.alpha)]
        .into_iter()
        .map(|(side, factor)| {
            let t1 = g.t0 * factor.powi(m as i32);
            let ell = g.speed(side);
            let q = one - ell * ell;
            let (integral, nodes) = weighted_trace_integral(c, side, t1, quad_n);
            TracePart { side, window: (g.t0, t1), weight: q * q, integral, nodes }
        })
        .collect();
    let lhs = parts.iter().map(|p| p.weight * p.integral).sum::<T>();
    let rhs = T::lit(4.0) * T::of(m) * c.s_invariant();
    Ok(TraceIdentityReport { mode: EndpointMode::TwoEndpoint, m, lhs, rhs, residual: (lhs - rhs).abs(), parts })
}

/// Two-sided bounds `4M(1-L) t0 E0 <= (1-ell^2)^2 lhs <= 4M(1+L) t0 E0`.
pub fn sandwich_bounds<T: Real>(g: &DomainGeometry<T>, m: usize, e0: T) -> (T, T) {
    let base = T::lit(4.0) * T::of(m) * g.t0 * e0;
    (base * (T::one() - g.l_max), base * (T::one() + g.l_max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObservabilityBudget<T> {
    pub mode: EndpointMode,
    #[serde(rename = "T")]
    pub horizon: T,
    pub feasible: bool,
    pub sharp_time: T,
    pub inverse_constant: T,
    pub direct_constant: T,
    /// Window exponent used in the direct constant.
    #[serde(rename = "M")]
    pub m: usize,
}

/// Inverse and direct observability constants for a window of length `horizon`.
pub fn observability_budget<T: Real>(
    g: &DomainGeometry<T>,
    horizon: T,
    mode: EndpointMode,
) -> Result<ObservabilityBudget<T>> {
    if !(horizon >= T::zero()) || !horizon.is_finite() {
        return Err(WaveError::InvalidArgument("observation time must be finite and nonnegative".into()));
    }
    let one = T::one();
    let four = T::lit(4.0);
    let big = g.l_max;
    let small = g.ell1.min(g.ell2);
    let ratio = (one + horizon / g.t0).ln();
    let exponent = |base: T| (ratio / base.ln()).ceil().to_usize().unwrap_or(1).max(1);
    Ok(match mode {
        EndpointMode::OneEndpoint => {
            let q = one - g.ell2 * g.ell2;
            let m = exponent(g.alpha_beta());
            ObservabilityBudget {
                mode,
                horizon,
                feasible: horizon >= g.t_obs1,
                sharp_time: g.t_obs1,
                inverse_constant: g.alpha_beta() * q * q / (four * (one - big)),
                direct_constant: four * T::of(m) * (one + big) / (q * q),
                m,
            }
        }
        EndpointMode::TwoEndpoint => {
            let q = one - small * small;
            let qq = one - big * big;
            let m = exponent(g.alpha.min(g.beta));
            ObservabilityBudget {
                mode,
                horizon,
                feasible: horizon >= g.t_obs2,
                sharp_time: g.t_obs2,
                inverse_constant: q * q * g.alpha.max(g.beta) / (four * (one - big)),
                direct_constant: four * T::of(m) * (one + big) / (qq * qq),
                m,
            }
        }
    })
}

/// Pair of opposite-sign mollifier bumps in `t`, extended
/// `alpha beta`-periodically in the multiplicative sense.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BumpPair<T> {
    pub support: (T, T),
    pub centers: (T, T),
    pub radius: T,
    pub amplitudes: (T, T),
    /// Fundamental window `(t0, alpha beta t0)`.
    pub period_window: (T, T),
}

fn mollifier<T: Real>(z: T) -> T {
    if z.abs() >= T::one() {
        T::zero()
    } else {
        (-T::one() / (T::one() - z * z)).exp()
    }
}

impl<T: Real> BumpPair<T> {
    fn raw(&self, t: T) -> T {
        self.amplitudes.0 * mollifier((t - self.centers.0) / self.radius)
            + self.amplitudes.1 * mollifier((t - self.centers.1) / self.radius)
    }

    /// `g(t)` for any `t > 0`.
    pub fn eval(&self, t: T) -> T {
        let (a, b) = self.period_window;
        let p = (b / a).ln();
        let k = ((t / a).ln() / p).floor();
        self.raw(t / (b / a).powf(k))
    }

    /// `int g dt / t` over one period.
    pub fn log_mean(&self, nodes: usize) -> T {
        composite_nodes(self.support.0, self.support.1, nodes, &[self.centers.0, self.centers.1])
            .into_iter()
            .map(|(t, w)| w * self.raw(t) / t)
            .sum()
    }
}

#[derive(Debug, Clone)]
pub struct Counterexample<T> {
    pub epsilon: T,
    pub mode: EndpointMode,
    pub profile: BumpPair<T>,
    /// `g_n` for `n = 1..=N` (`g_{-n}` is the conjugate, `g_0 = 0`).
    pub g_n: Vec<Complex<T>>,
    pub coefficients: SpectralCoefficients<T>,
    pub silent_window: (T, T),
    pub tail_indicator: T,
    /// False when the truncation is too short to resolve the bumps.
    pub resolved: bool,
}

/// Tail indicator above which a counterexample is flagged as unresolved.
pub const RESOLUTION_THRESHOLD: f64 = 1e-10;

/// Builds the profile `g`, its Fourier data and the series whose boundary
/// traces reproduce `g`, with `N` modes.
pub fn build_counterexample<T: Real>(
    g: &DomainGeometry<T>,
    epsilon: T,
    mode: EndpointMode,
    n_max: usize,
) -> Result<Counterexample<T>> {
    let one = T::one();
    if !(epsilon > T::zero() && epsilon < one) {
        return Err(WaveError::InvalidArgument(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if n_max < 4 {
        return Err(WaveError::InvalidArgument("counterexample needs N >= 4".into()));
    }
    let ab = g.alpha_beta();
    let (top, silent_end) = match mode {
        EndpointMode::OneEndpoint => (ab * g.t0, (one - epsilon) * ab * g.t0),
        EndpointMode::TwoEndpoint if g.ell2 >= g.ell1 => (g.alpha * g.t0, (one - epsilon) * g.alpha * g.t0),
        EndpointMode::TwoEndpoint => (ab * g.t0, (one - epsilon) * g.beta * g.t0),
    };
    let lo = (one - epsilon) * top;
    let lo = lo.max(g.t0);
    let w = top - lo;
    let three = T::lit(3.0);
    let mut profile = BumpPair {
        support: (lo, top),
        centers: (lo + w / three, lo + T::lit(2.0) * w / three),
        radius: T::lit(0.3) * w,
        amplitudes: (one, -one),
        period_window: (g.t0, ab * g.t0),
    };
    // The zero-mean condition is linear in the second amplitude: one secant
    // step from two trial values lands on the root.
    let quad = 4096;
    let f = |a2: T, p: &mut BumpPair<T>| {
        p.amplitudes.1 = a2;
        p.log_mean(quad)
    };
    let (x0, x1) = (-one, -one - T::lit(0.1));
    let (f0, f1) = (f(x0, &mut profile), f(x1, &mut profile));
    let root = x1 - f1 * (x1 - x0) / (f1 - f0);
    profile.amplitudes.1 = root;
    let mean = profile.log_mean(quad);
    if mean.abs() > T::lit(1e-12).max(T::epsilon() * T::lit(64.0)) {
        return Err(WaveError::NonFinite(format!("zero-mean root-find left residual {mean}")));
    }

    let g_n = profile_coefficients(g, &profile, n_max);
    let kappa = g.kappa;
    let two_pi = T::lit(2.0) * T::PI();
    let shift = (one + g.ell2).ln();
    let coefficients = SpectralCoefficients::from_fn(g, n_max, |n| {
        let k = n.unsigned_abs() as usize;
        let gn = if n > 0 { g_n[k - 1] } else { g_n[k - 1].conj() };
        let nn = T::from_i64(n).expect("mode index");
        let phase = Complex::from_polar(one, -nn * T::PI() * kappa * shift);
        gn * phase / Complex::new(T::zero(), two_pi * nn * kappa)
    });
    let tail_indicator = coefficients.tail_indicator();
    Ok(Counterexample {
        epsilon,
        mode,
        profile,
        g_n,
        coefficients,
        silent_window: (g.t0, silent_end),
        tail_indicator,
        resolved: tail_indicator < T::lit(RESOLUTION_THRESHOLD),
    })
}

/// `g_n = (kappa/2) int g(t) exp(-i n pi kappa log t) dt/t` for `n = 1..=N`,
/// refining until the coefficients settle.
fn profile_coefficients<T: Real>(g: &DomainGeometry<T>, p: &BumpPair<T>, n_max: usize) -> Vec<Complex<T>> {
    let eval = |nodes: usize| -> Vec<Complex<T>> {
        let pts = composite_nodes(p.support.0, p.support.1, nodes, &[p.centers.0, p.centers.1]);
        let half_kappa = g.kappa / T::lit(2.0);
        let parts = pts
            .par_chunks(1024)
            .map(|chunk| {
                let mut acc = vec![Complex::new(T::zero(), T::zero()); n_max];
                for &(t, w) in chunk {
                    let weight = w * p.raw(t) / t;
                    if weight == T::zero() {
                        continue;
                    }
                    let base = Complex::from_polar(T::one(), -T::PI() * g.kappa * t.ln());
                    let mut z = Complex::new(weight, T::zero());
                    for a in acc.iter_mut() {
                        z = z * base;
                        *a = *a + z;
                    }
                }
                acc
            })
            .collect::<Vec<_>>();
        // Chunks are summed in order so the result does not depend on scheduling.
        let mut total = vec![Complex::new(T::zero(), T::zero()); n_max];
        for part in parts {
            for (a, b) in total.iter_mut().zip(part) {
                *a = *a + b;
            }
        }
        total.into_iter().map(|v| v * half_kappa).collect()
    };
    let mut nodes = (16 * n_max).max(1024);
    let mut prev = eval(nodes);
    let scale = prev.iter().map(|z| z.norm()).fold(T::zero(), T::max).max(T::min_positive_value());
    for _ in 0..6 {
        nodes *= 2;
        let next = eval(nodes);
        let change = prev.iter().zip(&next).map(|(a, b)| (*a - *b).norm()).fold(T::zero(), T::max);
        prev = next;
        if change <= T::lit(1e-14) * scale {
            break;
        }
    }
    prev
}

impl<T: Real> Counterexample<T> {
    /// Closed-form trace: `g(t) / ((1 - ell2^2) t)` on the right and, in
    /// two-endpoint mode, `g(alpha t) / ((1 - ell1^2) t)` on the left.
    pub fn predicted_trace(&self, side: Side, t: T) -> Option<T> {
        let g = self.coefficients.geometry();
        let one = T::one();
        match (side, self.mode) {
            (Side::Right, _) => Some(self.profile.eval(t) / ((one - g.ell2 * g.ell2) * t)),
            (Side::Left, EndpointMode::TwoEndpoint) => {
                Some(self.profile.eval(g.alpha * t) / ((one - g.ell1 * g.ell1) * t))
            }
            (Side::Left, EndpointMode::OneEndpoint) => None,
        }
    }

    /// Truncated Fourier series of `g` at `t`.
    pub fn series_profile(&self, t: T) -> T {
        let g = self.coefficients.geometry();
        let base = Complex::from_polar(T::one(), T::PI() * g.kappa * t.ln());
        let mut z = Complex::new(T::one(), T::zero());
        let mut s = T::zero();
        for gn in &self.g_n {
            z = z * base;
            s = s + (*gn * z).re;
        }
        T::lit(2.0) * s
    }

    /// Sup of `|trace|` over the silent window and the peak over the full
    /// period, sampled at `samples` points each.
    pub fn silence(&self, side: Side, samples: usize) -> SilenceReport<T> {
        let g = *self.coefficients.geometry();
        let c = &self.coefficients;
        let sup = |a: T, b: T| -> T {
            (0..samples)
                .into_par_iter()
                .map(|i| {
                    let t = a + (b - a) * T::of(i) / T::of(samples - 1);
                    c.boundary_trace(side, t).abs()
                })
                .collect::<Vec<T>>()
                .into_iter()
                .fold(T::zero(), T::max)
        };
        let (s0, s1) = self.silent_window;
        let silent_sup = sup(s0, s1);
        let peak = sup(g.t0, g.alpha_beta() * g.t0);
        let full = crate::quadrature::integrate(
            |t| {
                let v = c.boundary_trace(side, t);
                v * v
            },
            g.t0,
            g.alpha_beta() * g.t0,
            samples.max(PANEL_ORDER),
            &[self.profile.support.0, self.profile.support.1],
        );
        SilenceReport { side, silent_window: self.silent_window, silent_sup, peak, full_window_integral: full }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SilenceReport<T> {
    pub side: Side,
    pub silent_window: (T, T),
    pub silent_sup: T,
    pub peak: T,
    pub full_window_integral: T,
}

impl<T: Real> SilenceReport<T> {
    pub fn ratio(&self) -> T {
        if self.peak == T::zero() {
            T::zero()
        } else {
            self.silent_sup / self.peak
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mollifier_is_compact() {
        assert_eq!(mollifier(1.0f64), 0.0);
        assert!((mollifier(0.0f64) - (-1.0f64).exp()).abs() < 1e-16);
    }
}
