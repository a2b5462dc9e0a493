//! Energy `E(t) = (1/2) int (phi_x^2 + phi_t^2) dx` on `I_t` and the identity
//! `t E(t) + int x phi_x phi_t dx = S`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, WaveError};
use crate::geometry::DomainGeometry;
use crate::quadrature;
use crate::scalar::Real;
use crate::spectral::SpectralCoefficients;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport<T> {
    pub t: T,
    #[serde(rename = "E")]
    pub energy: T,
    pub cross_term: T,
    #[serde(rename = "S")]
    pub s: T,
    pub identity_residual: T,
    /// `S / (t (1 + L))`.
    pub lower: T,
    /// `S / (t (1 - L))`.
    pub upper: T,
    /// Quadrature nodes used after doubling.
    pub nodes: usize,
}

impl<T: Real> EnergyReport<T> {
    pub fn t_energy(&self) -> T {
        self.t * self.energy
    }

    /// Whether `lower - slack <= E <= upper + slack` with `slack = rel * S / t`.
    pub fn within_bounds(&self, rel: T) -> bool {
        let slack = rel * self.s / self.t;
        self.energy >= self.lower - slack && self.energy <= self.upper + slack
    }
}

/// `(E, int x phi_x phi_t)` over `(a, b)` by composite Gauss–Legendre with `n` nodes.
pub fn energy_and_cross<T: Real, F>(a: T, b: T, n: usize, f: &F) -> (T, T)
where
    F: Fn(T) -> (T, T) + Sync,
{
    let nodes = quadrature::composite_nodes(a, b, n, &[]);
    let half = T::lit(0.5);
    let parts: Vec<(T, T)> = nodes
        .par_iter()
        .map(|&(x, w)| {
            let (px, pt) = f(x);
            (w * half * (px * px + pt * pt), w * x * px * pt)
        })
        .collect();
    parts.into_iter().fold((T::zero(), T::zero()), |(e, c), (de, dc)| (e + de, c + dc))
}

/// Doubles the node count from `n0` until both integrals change by at most `tol`.
pub fn energy_until_stable<T: Real, F>(a: T, b: T, n0: usize, tol: T, f: &F) -> (T, T, usize)
where
    F: Fn(T) -> (T, T) + Sync,
{
    let max_nodes = 1usize << 16;
    let mut n = n0.max(quadrature::PANEL_ORDER);
    let mut prev = energy_and_cross(a, b, n, f);
    while n * 2 <= max_nodes {
        let next = energy_and_cross(a, b, n * 2, f);
        n *= 2;
        let done = (next.0 - prev.0).abs() <= tol && (next.1 - prev.1).abs() <= tol;
        prev = next;
        if done {
            break;
        }
    }
    (prev.0, prev.1, n)
}

/// Energy, cross term and identity residual of the truncated series at time `t`.
pub fn energy_report<T: Real>(c: &SpectralCoefficients<T>, t: T, quad_n: usize) -> Result<EnergyReport<T>> {
    let g = c.geometry();
    let (a, b) = g.interval_at(t)?;
    let s = c.s_invariant();
    let f = |x: T| {
        let v = c.evaluate(x, t).expect("quadrature node inside the interval");
        (v.phi_x, v.phi_t)
    };
    let tol = T::lit(1e-10) * s.max(T::min_positive_value());
    let (energy, cross, nodes) = energy_until_stable(a, b, quad_n, tol, &f);
    let one = T::one();
    Ok(EnergyReport {
        t,
        energy,
        cross_term: cross,
        s,
        identity_residual: (t * energy + cross - s).abs(),
        lower: s / (t * (one + g.l_max)),
        upper: s / (t * (one - g.l_max)),
        nodes,
    })
}

/// Reports on an ascending time grid; repeated times are reported once.
pub fn decay_scan<T: Real>(c: &SpectralCoefficients<T>, t_grid: &[T], quad_n: usize) -> Result<Vec<EnergyReport<T>>> {
    if t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(WaveError::InvalidArgument("time grid must be ascending".into()));
    }
    let mut ts: Vec<T> = t_grid.to_vec();
    ts.dedup();
    ts.iter().map(|&t| energy_report(c, t, quad_n)).collect()
}

/// Two-sided bound on `E(t)` from `E(t0)`: `((1 -+ L)/(1 +- L)) t0 E(t0) / t`.
pub fn stability_bounds<T: Real>(g: &DomainGeometry<T>, e0: T, t: T) -> (T, T) {
    let one = T::one();
    let l = g.l_max;
    let base = g.t0 * e0 / t;
    ((one - l) / (one + l) * base, (one + l) / (one - l) * base)
}
