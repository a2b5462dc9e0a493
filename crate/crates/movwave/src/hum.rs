//! Boundary controls and their synthesis by the Hilbert Uniqueness Method.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};
use crate::extension::{Func, InitialData};
use crate::geometry::{DomainGeometry, Side};
use crate::observability::{observability_budget, EndpointMode};
use crate::oracle::{trace_to_initial_line, Family, Oracle};
use crate::quadrature::{composite_nodes, integrate_until_stable, trapezoid_weights, GaussLegendre};
use crate::scalar::Real;
use crate::spectral::SpectralCoefficients;

/// Boundary control sampled uniformly on `[t_start, t_end]`; linear
/// interpolation in between, zero outside the window.
#[derive(Clone)]
pub struct ControlFunction<T: Real> {
    pub side: Side,
    pub t_start: T,
    pub t_end: T,
    samples: Vec<T>,
    analytic: Option<(Func<T>, Func<T>)>,
}

impl<T: Real> std::fmt::Debug for ControlFunction<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ControlFunction")
            .field("side", &self.side)
            .field("window", &(self.t_start, self.t_end))
            .field("samples", &self.samples.len())
            .field("analytic", &self.analytic.is_some())
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControlSample<T> {
    pub t: T,
    pub v: T,
}

impl<T: Real> ControlFunction<T> {
    pub fn from_samples(side: Side, t_start: T, t_end: T, samples: Vec<T>) -> Result<Self> {
        if samples.len() < 2 || !(t_end > t_start) {
            return Err(WaveError::InvalidArgument("control needs two samples and a positive window".into()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(WaveError::NonFinite("control samples".into()));
        }
        Ok(Self { side, t_start, t_end, samples, analytic: None })
    }

    /// Samples `f` at `n` uniform times.
    pub fn sample<F: Fn(T) -> T>(side: Side, t_start: T, t_end: T, n: usize, f: F) -> Result<Self> {
        let h = (t_end - t_start) / T::of(n - 1);
        Self::from_samples(side, t_start, t_end, (0..n).map(|i| f(t_start + h * T::of(i))).collect())
    }

    /// Control given by analytic value and derivative handles (also sampled with `n` points).
    pub fn analytic(side: Side, t_start: T, t_end: T, n: usize, v: Func<T>, dv: Func<T>) -> Result<Self> {
        let mut c = Self::sample(side, t_start, t_end, n, |t| v(t))?;
        c.analytic = Some((v, dv));
        Ok(c)
    }

    pub fn zero(side: Side, t_start: T, t_end: T, n: usize) -> Result<Self> {
        Self::from_samples(side, t_start, t_end, vec![T::zero(); n])
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn step(&self) -> T {
        (self.t_end - self.t_start) / T::of(self.samples.len() - 1)
    }

    pub fn times(&self) -> impl Iterator<Item = T> + '_ {
        let h = self.step();
        (0..self.samples.len()).map(move |i| self.t_start + h * T::of(i))
    }

    pub fn rows(&self) -> Vec<ControlSample<T>> {
        self.times().zip(self.samples.iter()).map(|(t, &v)| ControlSample { t, v }).collect()
    }

    fn locate(&self, t: T) -> Option<(usize, T)> {
        if t < self.t_start || t > self.t_end {
            return None;
        }
        let h = self.step();
        let s = (t - self.t_start) / h;
        let i = s.floor().to_usize().unwrap_or(0).min(self.samples.len() - 2);
        Some((i, s - T::of(i)))
    }

    pub fn value(&self, t: T) -> T {
        if let Some((v, _)) = &self.analytic {
            return if t < self.t_start || t > self.t_end { T::zero() } else { v(t) };
        }
        match self.locate(t) {
            None => T::zero(),
            Some((i, th)) => self.samples[i] * (T::one() - th) + self.samples[i + 1] * th,
        }
    }

    pub fn derivative(&self, t: T) -> T {
        if let Some((_, dv)) = &self.analytic {
            return if t < self.t_start || t > self.t_end { T::zero() } else { dv(t) };
        }
        match self.locate(t) {
            None => T::zero(),
            Some((i, _)) => (self.samples[i + 1] - self.samples[i]) / self.step(),
        }
    }

    /// `int v^2 dt` of the piecewise-linear interpolant (exact).
    pub fn l2_norm_sqr(&self) -> T {
        let h = self.step();
        let three = T::lit(3.0);
        self.samples.windows(2).map(|w| h * (w[0] * w[0] + w[0] * w[1] + w[1] * w[1]) / three).sum()
    }

    /// Copy with samples scaled by `s`.
    pub fn scaled(&self, s: T) -> Self {
        let mut c = self.clone();
        c.analytic = None;
        c.samples = self.samples.iter().map(|&v| v * s).collect();
        c
    }

    /// Copy with every sample at `t >= cutoff` set to zero.
    pub fn truncated_after(&self, cutoff: T) -> Self {
        let mut c = self.clone();
        c.analytic = None;
        let times: Vec<T> = self.times().collect();
        for (v, t) in c.samples.iter_mut().zip(times) {
            if t >= cutoff {
                *v = T::zero();
            }
        }
        c
    }

    /// Relative L2 distance of sample vectors.
    pub fn relative_distance(&self, other: &Self) -> T {
        let num: T = self.samples.iter().zip(&other.samples).map(|(a, b)| (*a - *b) * (*a - *b)).sum();
        let den: T = other.samples.iter().map(|b| *b * *b).sum();
        if den == T::zero() {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }
}

/// Controls active at the two endpoints.
#[derive(Debug, Clone, Copy, Default)]
pub struct Controls<'a, T: Real> {
    pub left: Option<&'a ControlFunction<T>>,
    pub right: Option<&'a ControlFunction<T>>,
}

impl<'a, T: Real> Controls<'a, T> {
    pub fn none() -> Self {
        Self { left: None, right: None }
    }

    pub fn get(&self, side: Side) -> Option<&'a ControlFunction<T>> {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
        }
    }
}

/// Uniform grid on the initial interval carrying the HUM unknowns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HumGrid<T> {
    pub a: T,
    pub b: T,
    pub nodes: usize,
    pub step: T,
    /// Trapezoid weights.
    pub weights: Vec<T>,
}

impl<T: Real> HumGrid<T> {
    pub fn new(g: &DomainGeometry<T>, nodes: usize) -> Result<Self> {
        if nodes < 3 {
            return Err(WaveError::InvalidArgument("HUM grid needs at least 3 nodes".into()));
        }
        let (a, b) = g.initial_interval();
        let step = (b - a) / T::of(nodes - 1);
        Ok(Self { a, b, nodes, step, weights: trapezoid_weights(nodes, step) })
    }

    pub fn x(&self, j: usize) -> T {
        if j + 1 == self.nodes {
            self.b
        } else {
            self.a + self.step * T::of(j)
        }
    }

    /// Cell index and local coordinate of `x`.
    fn locate(&self, x: T) -> (usize, T) {
        let s = ((x - self.a) / self.step).max(T::zero());
        let k = s.floor().to_usize().unwrap_or(0).min(self.nodes - 2);
        (k, (s - T::of(k)).max(T::zero()).min(T::one()))
    }

    fn lerp(&self, v: &[T], x: T) -> T {
        let (k, th) = self.locate(x);
        v[k] * (T::one() - th) + v[k + 1] * th
    }

    /// `int_{x_j}^{b} f` at every node, four-point Gauss per cell.
    fn tail_integrals<F: Fn(T) -> T>(&self, f: F) -> Vec<T> {
        let gl = GaussLegendre::cached(4);
        let half = self.step / T::lit(2.0);
        let mut out = vec![T::zero(); self.nodes];
        for k in (0..self.nodes - 1).rev() {
            let mid = self.x(k) + half;
            let cell: T = gl.nodes.iter().zip(&gl.weights).map(|(s, w)| T::lit(*w) * f(mid + half * T::lit(*s))).sum();
            out[k] = out[k + 1] + cell * half;
        }
        out
    }

    /// Weighted mean removal: the `E`-orthogonal projection onto `sum w q = 0`.
    fn project(&self, q: &mut [T]) {
        let total: T = self.weights.iter().copied().sum();
        let mean = self.weights.iter().zip(q.iter()).map(|(w, v)| *w * *v).sum::<T>() / total;
        for v in q.iter_mut() {
            *v = *v - mean;
        }
    }
}

/// Nodal initial state: `phi0_x` and `phi1` are continuous piecewise linear
/// and `phi0` is the primitive of `phi0_x` from the left end. The constraint
/// `sum w phi0_x = 0` makes `phi0` vanish at both ends.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HumState<T> {
    pub phi0_x: Vec<T>,
    pub phi1: Vec<T>,
}

impl<T: Real> HumState<T> {
    pub fn zeros(n: usize) -> Self {
        Self { phi0_x: vec![T::zero(); n], phi1: vec![T::zero(); n] }
    }

    /// Nodal interpolant of `(phi0_x, phi1)` of `d`, projected onto the constraint.
    pub fn from_data(grid: &HumGrid<T>, d: &InitialData<T>) -> Self {
        let mut phi0_x: Vec<T> = (0..grid.nodes).map(|j| d.phi0_x(grid.x(j))).collect();
        grid.project(&mut phi0_x);
        Self { phi0_x, phi1: (0..grid.nodes).map(|j| d.phi1(grid.x(j))).collect() }
    }

    /// Nodal values of `phi0`.
    pub fn phi0(&self, grid: &HumGrid<T>) -> Vec<T> {
        let half = grid.step / T::lit(2.0);
        let mut out = Vec::with_capacity(self.phi0_x.len());
        let mut acc = T::zero();
        out.push(acc);
        for w in self.phi0_x.windows(2) {
            acc = acc + half * (w[0] + w[1]);
            out.push(acc);
        }
        out
    }

    fn from_flat(v: &[T]) -> Self {
        let n = v.len() / 2;
        Self { phi0_x: v[..n].to_vec(), phi1: v[n..].to_vec() }
    }

    fn flat(&self) -> Vec<T> {
        self.phi0_x.iter().chain(&self.phi1).copied().collect()
    }

    /// The state as function handles on the initial interval.
    pub fn to_initial_data(&self, grid: &HumGrid<T>) -> InitialData<T> {
        let grid = Arc::new(grid.clone());
        let q = Arc::new(self.phi0_x.clone());
        let p = Arc::new(self.phi1.clone());
        let nodes0 = Arc::new(self.phi0(&grid));
        let (g0, q0) = (grid.clone(), q.clone());
        let phi0: Func<T> = Arc::new(move |x| {
            let (k, th) = g0.locate(x);
            let h = g0.step;
            nodes0[k] + h * th * (q0[k] + (q0[k + 1] - q0[k]) * th / T::lit(2.0))
        });
        let (g1, g2) = (grid.clone(), grid.clone());
        InitialData::on_interval(
            (grid.a, grid.b),
            phi0,
            Arc::new(move |x| g1.lerp(&p, x)),
            Some(Arc::new(move |x| g2.lerp(&q, x))),
        )
    }
}

/// Dual element `(psi_t(t0), -psi(t0))` in nodal form. The `H^-1` part is
/// carried by its tail primitive `Psi(x) = int_x^b psi_t`, which pairs with
/// `phi0_x`: `int psi_t phi0 = int Psi phi0_x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HumDual<T> {
    pub psi_t_tail: Vec<T>,
    pub minus_psi: Vec<T>,
}

impl<T: Real> HumDual<T> {
    /// Nodal `psi_t` by differencing the tail primitive.
    pub fn psi_t(&self, grid: &HumGrid<T>) -> Vec<T> {
        let v = &self.psi_t_tail;
        let n = v.len();
        let h = grid.step;
        (0..n)
            .map(|j| {
                let (lo, hi) = (j.saturating_sub(1), (j + 1).min(n - 1));
                -(v[hi] - v[lo]) / (h * T::of(hi - lo))
            })
            .collect()
    }
}

/// Right-hand side of the HUM equation.
#[derive(Debug, Clone)]
pub enum HumTarget<T: Real> {
    /// Data `(u0, u1)` to be steered to rest: solve `Lambda a = (u1, -u0)`.
    Data(InitialData<T>),
    /// A prescribed dual element.
    Dual(HumDual<T>),
    /// The dual element representing the energy product with a state.
    Riesz(HumState<T>),
}

/// One time-quadrature node of the observation operator: the trace there is
/// `scale * (sign phi0_x + phi1)` at the foot `(cell, theta)` of the characteristic.
#[derive(Debug, Clone, Copy)]
struct Row<T> {
    weight: T,
    cell: usize,
    theta: T,
    /// +1 for `phi0_x + phi1`, -1 for `phi1 - phi0_x`.
    sign: T,
    scale: T,
}

/// Discretized HUM operator for a fixed geometry, horizon and mode.
#[derive(Debug, Clone)]
pub struct HumProblem<T: Real> {
    geometry: DomainGeometry<T>,
    grid: HumGrid<T>,
    horizon: T,
    mode: EndpointMode,
    rows: Vec<(Side, Vec<Row<T>>)>,
}

/// Exact boundary trace of a nodal state.
#[derive(Debug, Clone)]
struct TraceEvaluator<T: Real> {
    geometry: DomainGeometry<T>,
    grid: HumGrid<T>,
    state: HumState<T>,
}

/// Characteristic data of the trace at `(side, t)`: foot family, foot
/// abscissa, `dx/dt` of the foot and the constant factor in front of
/// `phi0_x +- phi1`.
fn trace_foot<T: Real>(g: &DomainGeometry<T>, side: Side, t: T) -> (Family, T, T, T) {
    let one = T::one();
    let two = T::lit(2.0);
    let (family, c, pre) = match side {
        Side::Right => (Family::Minus, one - g.ell2, -two / (one + g.ell2)),
        Side::Left => (Family::Plus, one - g.ell1, two / (one + g.ell1)),
    };
    let ray = trace_to_initial_line(g, g.t0, family, c * t).expect("trace on the wall");
    let ratio = ray.foot / (c * t);
    let (x, dxdt) = match ray.foot_family {
        Family::Plus => (ray.foot - g.t0, ratio * c),
        Family::Minus => (g.t0 - ray.foot, -ratio * c),
    };
    (ray.foot_family, x, dxdt, pre * ray.derivative_factor / two)
}

impl<T: Real> TraceEvaluator<T> {
    fn value_and_derivative(&self, side: Side, t: T) -> (T, T) {
        let (fam, x, dxdt, scale) = trace_foot(&self.geometry, side, t);
        let (k, th) = self.grid.locate(x);
        let (q, p) = (&self.state.phi0_x, &self.state.phi1);
        let sign = if fam == Family::Plus { T::one() } else { -T::one() };
        let lin = |v: &[T]| v[k] * (T::one() - th) + v[k + 1] * th;
        let slope = |v: &[T]| (v[k + 1] - v[k]) / self.grid.step;
        (scale * (sign * lin(q) + lin(p)), scale * (sign * slope(q) + slope(p)) * dxdt)
    }
}

/// Sign turning `phi_x` into the outward normal derivative: the HUM
/// control is `phi_x` on the right wall and `-phi_x` on the left wall.
fn outward_sign<T: Real>(side: Side) -> T {
    match side {
        Side::Right => T::one(),
        Side::Left => -T::one(),
    }
}

/// Times in `(t0, t_end)` where the trace characteristic changes generation.
fn generation_breaks<T: Real>(g: &DomainGeometry<T>, side: Side, t_end: T) -> Vec<T> {
    let inner = match side {
        Side::Right => g.alpha,
        Side::Left => g.beta,
    };
    let mut out = Vec::new();
    let mut base = g.t0;
    while base < t_end {
        for t in [base, base * inner] {
            if t > g.t0 && t < t_end {
                out.push(t);
            }
        }
        base = base * g.alpha_beta();
    }
    out
}

/// Defaults of the HUM solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HumOptions {
    pub nodes: usize,
    pub control_samples: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for HumOptions {
    fn default() -> Self {
        Self { nodes: 512, control_samples: 4096, tol: 1e-6, max_iter: 500 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CgStep<T> {
    pub iteration: usize,
    /// Relative residual in the energy norm.
    pub residual: T,
    /// `a^T M a / 2 - d^T a`; nonincreasing along the iteration.
    pub functional: T,
}

#[derive(Debug, Clone)]
pub struct HumSolution<T: Real> {
    pub state: HumState<T>,
    pub controls: Vec<ControlFunction<T>>,
    pub iterations: usize,
    pub residual: T,
    pub converged: bool,
    pub log: Vec<CgStep<T>>,
}

impl<T: Real> HumSolution<T> {
    /// The control at `side`, if observed.
    pub fn control(&self, side: Side) -> Option<&ControlFunction<T>> {
        self.controls.iter().find(|c| c.side == side)
    }

    pub fn as_controls(&self) -> Controls<'_, T> {
        Controls { left: self.control(Side::Left), right: self.control(Side::Right) }
    }

    /// Errors with [`WaveError::NoConvergence`] if the iteration stopped at `max_iter`.
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(WaveError::NoConvergence { iterations: self.iterations, residual: self.residual.to_f64_lossy() })
        }
    }
}

fn dot<T: Real>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).map(|(a, b)| *a * *b).sum()
}

impl<T: Real> HumProblem<T> {
    /// Observation over `(t0, t0 + horizon)` at the right endpoint
    /// (`OneEndpoint`) or at both, on a grid of `nodes` points.
    pub fn new(g: &DomainGeometry<T>, horizon: T, mode: EndpointMode, nodes: usize) -> Result<Self> {
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return Err(WaveError::InvalidArgument("control horizon must be positive".into()));
        }
        let grid = HumGrid::new(g, nodes)?;
        let sides: &[Side] = match mode {
            EndpointMode::OneEndpoint => &[Side::Right],
            EndpointMode::TwoEndpoint => &[Side::Left, Side::Right],
        };
        let rows = sides.iter().map(|&side| (side, Self::build_rows(g, &grid, side, g.t0 + horizon))).collect();
        Ok(Self { geometry: *g, grid, horizon, mode, rows })
    }

    /// Two-point Gauss rule on every sub-interval where the foot stays in one
    /// cell and one generation: the squared trace is quadratic there, so the
    /// observation integral is exact.
    fn build_rows(g: &DomainGeometry<T>, grid: &HumGrid<T>, side: Side, t_end: T) -> Vec<Row<T>> {
        let mut edges = vec![g.t0];
        edges.extend(generation_breaks(g, side, t_end));
        edges.push(t_end);
        let q = T::one() - g.speed(side) * g.speed(side);
        let node = T::one() / T::lit(3.0).sqrt() / T::lit(2.0);
        let half = T::lit(0.5);
        let mut rows = Vec::new();
        for w in edges.windows(2) {
            let (ta, tb) = (w[0], w[1]);
            let tm = half * (ta + tb);
            let (fam, xm, dxdt, scale) = trace_foot(g, side, tm);
            let x_at = |t: T| xm + dxdt * (t - tm);
            let (xa, xb) = (x_at(ta), x_at(tb));
            let (lo, hi) = (xa.min(xb), xa.max(xb));
            let mut cuts = vec![ta];
            let first = ((lo - grid.a) / grid.step).floor().to_usize().unwrap_or(0) + 1;
            for j in first..grid.nodes {
                let xj = grid.x(j);
                if xj >= hi {
                    break;
                }
                if xj > lo {
                    cuts.push(tm + (xj - xm) / dxdt);
                }
            }
            cuts.push(tb);
            cuts.sort_by(|p, r| p.partial_cmp(r).expect("finite cut"));
            let sign = if fam == Family::Plus { T::one() } else { -T::one() };
            for c in cuts.windows(2) {
                let (ca, cb) = (c[0], c[1]);
                if !(cb > ca) {
                    continue;
                }
                let (k, _) = grid.locate(x_at(half * (ca + cb)));
                let h = cb - ca;
                for s in [-node, node] {
                    let t = half * (ca + cb) + s * h;
                    let th = ((x_at(t) - grid.a) / grid.step - T::of(k)).max(T::zero()).min(T::one());
                    rows.push(Row { weight: q * half * h, cell: k, theta: th, sign, scale });
                }
            }
        }
        rows
    }

    pub fn geometry(&self) -> &DomainGeometry<T> {
        &self.geometry
    }

    pub fn grid(&self) -> &HumGrid<T> {
        &self.grid
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn mode(&self) -> EndpointMode {
        self.mode
    }

    /// Number of time-quadrature nodes per observed side.
    pub fn quadrature_sizes(&self) -> Vec<(Side, usize)> {
        self.rows.iter().map(|(s, r)| (*s, r.len())).collect()
    }

    fn observe(&self, v: &[T]) -> Vec<Vec<T>> {
        let n = self.grid.nodes;
        self.rows
            .iter()
            .map(|(_, rows)| {
                rows.par_iter()
                    .map(|r| {
                        let (k, th) = (r.cell, r.theta);
                        let lin = |o: usize| v[o + k] * (T::one() - th) + v[o + k + 1] * th;
                        r.scale * (r.sign * lin(0) + lin(n))
                    })
                    .collect()
            })
            .collect()
    }

    /// `O^T W y`.
    fn observe_adjoint(&self, y: &[Vec<T>]) -> Vec<T> {
        let n = self.grid.nodes;
        let mut out = vec![T::zero(); 2 * n];
        for ((_, rows), ys) in self.rows.iter().zip(y) {
            for (r, &yv) in rows.iter().zip(ys) {
                let c = r.weight * r.scale * yv;
                let (k, th) = (r.cell, r.theta);
                let (c0, c1) = (c * (T::one() - th), c * th);
                out[k] = out[k] + r.sign * c0;
                out[k + 1] = out[k + 1] + r.sign * c1;
                out[n + k] = out[n + k] + c0;
                out[n + k + 1] = out[n + k + 1] + c1;
            }
        }
        out
    }

    /// `M v = O^T W O v`, the dual vector of `Lambda v`.
    fn normal(&self, v: &[T]) -> Vec<T> {
        self.observe_adjoint(&self.observe(v))
    }

    /// Energy product `sum_j w_j (phi0_x psi0_x + phi1 psi1)_j`.
    pub fn energy_inner(&self, a: &HumState<T>, b: &HumState<T>) -> T {
        let w = &self.grid.weights;
        (0..self.grid.nodes).map(|j| w[j] * (a.phi0_x[j] * b.phi0_x[j] + a.phi1[j] * b.phi1[j])).sum()
    }

    /// Projected preconditioner: `E^{-1} d` followed by the constraint projection.
    fn energy_solve(&self, d: &[T]) -> Vec<T> {
        let n = self.grid.nodes;
        let w = &self.grid.weights;
        let mut out: Vec<T> = (0..2 * n).map(|i| d[i] / w[i % n]).collect();
        self.grid.project(&mut out[..n]);
        out
    }

    fn energy_apply(&self, v: &[T]) -> Vec<T> {
        let n = self.grid.nodes;
        (0..2 * n).map(|i| v[i] * self.grid.weights[i % n]).collect()
    }

    fn check_state(&self, s: &HumState<T>) -> Result<()> {
        let n = self.grid.nodes;
        if s.phi0_x.len() != n || s.phi1.len() != n {
            return Err(WaveError::InvalidArgument(format!("state must have {n} nodes")));
        }
        if s.phi0_x.iter().chain(&s.phi1).any(|v| !v.is_finite()) {
            return Err(WaveError::NonFinite("HUM state".into()));
        }
        Ok(())
    }

    fn constrained(&self, s: &HumState<T>) -> Vec<T> {
        let mut v = s.flat();
        self.grid.project(&mut v[..self.grid.nodes]);
        v
    }

    fn dual_vector(&self, d: &HumDual<T>) -> Vec<T> {
        let w = &self.grid.weights;
        d.psi_t_tail.iter().zip(w).chain(d.minus_psi.iter().zip(w)).map(|(v, w)| *v * *w).collect()
    }

    fn to_dual(&self, v: &[T]) -> HumDual<T> {
        let n = self.grid.nodes;
        let w = &self.grid.weights;
        HumDual {
            psi_t_tail: (0..n).map(|j| v[j] / w[j]).collect(),
            minus_psi: (0..n).map(|j| v[n + j] / w[j]).collect(),
        }
    }

    /// `Lambda a = (psi_t(t0), -psi(t0))` on the grid.
    pub fn apply_lambda(&self, a: &HumState<T>) -> Result<HumDual<T>> {
        self.check_state(a)?;
        let out = self.normal(&self.constrained(a));
        if out.iter().any(|x| !x.is_finite()) {
            return Err(WaveError::NonFinite("boundary trace".into()));
        }
        Ok(self.to_dual(&out))
    }

    /// `<d, b> = int psi_t phi0 - psi phi1`, discretized by the trapezoid rule.
    pub fn pairing(&self, d: &HumDual<T>, b: &HumState<T>) -> T {
        dot(&self.dual_vector(d), &self.constrained(b))
    }

    /// `sum_sides (1 - ell^2) int phi_x^2 dt` for the exact evolution of `a`.
    pub fn trace_integral(&self, a: &HumState<T>) -> T {
        let y = self.observe(&self.constrained(a));
        self.rows
            .iter()
            .zip(&y)
            .map(|((_, rows), ys)| rows.iter().zip(ys).map(|(r, v)| r.weight * *v * *v).sum::<T>())
            .sum()
    }

    /// `phi_x` at a wall for the exact evolution of the state.
    pub fn trace(&self, a: &HumState<T>, side: Side, t: T) -> T {
        let ev = TraceEvaluator { geometry: self.geometry, grid: self.grid.clone(), state: a.clone() };
        ev.value_and_derivative(side, t).0
    }

    /// Relative distance `|O(a - b)|_W / |O b|_W` between the controls of two states.
    pub fn control_distance(&self, a: &HumState<T>, b: &HumState<T>) -> T {
        let diff: Vec<T> = a.flat().iter().zip(b.flat()).map(|(x, y)| *x - y).collect();
        let num = self.trace_integral(&HumState::from_flat(&diff));
        let den = self.trace_integral(b);
        if den == T::zero() {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }

    /// Controls (outward normal derivatives) at the observed walls, evaluated
    /// exactly and also sampled at `samples` times.
    pub fn controls_of(&self, a: &HumState<T>, samples: usize) -> Result<Vec<ControlFunction<T>>> {
        let mut state = a.clone();
        self.grid.project(&mut state.phi0_x);
        let ev = Arc::new(TraceEvaluator { geometry: self.geometry, grid: self.grid.clone(), state });
        let (t0, t1) = (self.geometry.t0, self.geometry.t0 + self.horizon);
        self.rows
            .iter()
            .map(|(side, _)| {
                let side = *side;
                let sign = outward_sign::<T>(side);
                let (e1, e2) = (ev.clone(), ev.clone());
                ControlFunction::analytic(
                    side,
                    t0,
                    t1,
                    samples.max(2),
                    Arc::new(move |t| sign * e1.value_and_derivative(side, t).0),
                    Arc::new(move |t| sign * e2.value_and_derivative(side, t).1),
                )
            })
            .collect()
    }

    fn target_vector(&self, target: &HumTarget<T>) -> Result<Vec<T>> {
        let n = self.grid.nodes;
        let w = &self.grid.weights;
        let v = match target {
            HumTarget::Data(d) => {
                let tail = self.grid.tail_integrals(|x| d.phi1(x));
                (0..n).map(|j| w[j] * tail[j]).chain((0..n).map(|j| -w[j] * d.phi0(self.grid.x(j)))).collect()
            }
            HumTarget::Dual(d) => {
                if d.psi_t_tail.len() != n || d.minus_psi.len() != n {
                    return Err(WaveError::InvalidArgument(format!("dual must have {n} nodes")));
                }
                self.dual_vector(d)
            }
            HumTarget::Riesz(s) => {
                self.check_state(s)?;
                self.energy_apply(&self.constrained(s))
            }
        };
        if v.iter().any(|x: &T| !x.is_finite()) {
            return Err(WaveError::NonFinite("HUM target".into()));
        }
        Ok(v)
    }

    /// Largest Rayleigh quotient of `Lambda` found by a few power steps from
    /// the unit-velocity state.
    fn spectral_scale(&self) -> T {
        let n = self.grid.nodes;
        let mut v: Vec<T> = (0..2 * n).map(|i| if i < n { T::zero() } else { T::one() }).collect();
        let mut top = T::zero();
        for _ in 0..8 {
            let mv = self.normal(&v);
            let ev = dot(&v, &self.energy_apply(&v));
            if !(ev > T::zero()) {
                break;
            }
            top = top.max(dot(&v, &mv) / ev);
            v = self.energy_solve(&mv);
        }
        top
    }

    /// Solves `Lambda a = target` by conjugate gradients in the energy
    /// product and returns `a` with its boundary controls.
    pub fn synthesize_control(&self, target: &HumTarget<T>, opts: &HumOptions) -> Result<HumSolution<T>> {
        let d = self.target_vector(target)?;
        let n2 = d.len();
        let mut x = vec![T::zero(); n2];
        let mut r = d.clone();
        let mut z = self.energy_solve(&r);
        let mut rz = dot(&r, &z);
        let r0 = rz.max(T::zero()).sqrt();
        let tol = T::lit(opts.tol);
        let mut log = Vec::new();
        let mut residual = T::zero();
        let mut iterations = 0;
        if r0 > T::zero() {
            residual = T::one();
            let mut p = z.clone();
            let floor = T::lit(1e3) * T::epsilon() * self.spectral_scale();
            while iterations < opts.max_iter && residual > tol {
                let q = self.normal(&p);
                let pq = dot(&p, &q);
                // Curvature at round-off level: p lies in the numerical kernel
                // and further steps would only amplify rounding.
                if !(pq > floor * dot(&p, &self.energy_apply(&p))) {
                    break;
                }
                let step = rz / pq;
                for i in 0..n2 {
                    x[i] = x[i] + step * p[i];
                    r[i] = r[i] - step * q[i];
                }
                z = self.energy_solve(&r);
                let rz_new = dot(&r, &z);
                iterations += 1;
                residual = rz_new.max(T::zero()).sqrt() / r0;
                // M x = d - r.
                let mx: Vec<T> = d.iter().zip(&r).map(|(a, b)| *a - *b).collect();
                let functional = dot(&x, &mx) / T::lit(2.0) - dot(&d, &x);
                log.push(CgStep { iteration: iterations, residual, functional });
                if !residual.is_finite() {
                    return Err(WaveError::NonFinite("CG residual".into()));
                }
                let beta = rz_new / rz;
                rz = rz_new;
                for i in 0..n2 {
                    p[i] = z[i] + beta * p[i];
                }
            }
        }
        let state = HumState::from_flat(&x);
        let controls = self.controls_of(&state, opts.control_samples)?;
        Ok(HumSolution { state, controls, iterations, residual, converged: residual <= tol, log })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NullControlReport<T> {
    pub initial_energy: T,
    pub terminal_energy: T,
    pub terminal_energy_ratio: T,
    /// Set when the initial energy vanishes and the ratio is reported as 0.
    pub degenerate: bool,
}

/// Forward-solves from `(u0, u1)` with the given controls and compares the
/// energy at `t0 + horizon` with the initial energy.
pub fn verify_null_control<T: Real>(
    g: &DomainGeometry<T>,
    u: &InitialData<T>,
    controls: &Controls<'_, T>,
    horizon: T,
    samples: usize,
) -> Result<NullControlReport<T>> {
    let oracle = Oracle::new(g, u, samples)?;
    let e0 = u.energy(4096);
    let tol = T::lit(1e-12) * e0.max(T::min_positive_value());
    let e1 = oracle.energy(g.t0 + horizon, controls, 1024, tol)?;
    if e0 == T::zero() {
        return Ok(NullControlReport {
            initial_energy: e0,
            terminal_energy: e1,
            terminal_energy_ratio: T::zero(),
            degenerate: true,
        });
    }
    Ok(NullControlReport { initial_energy: e0, terminal_energy: e1, terminal_energy_ratio: e1 / e0, degenerate: false })
}

/// Whether `sum_sides int v^2 <= K(T) E0` with the direct constant of
/// [`observability_budget`].
pub fn control_bound_check<T: Real>(
    g: &DomainGeometry<T>,
    controls: &[&ControlFunction<T>],
    e0: T,
    horizon: T,
    mode: EndpointMode,
) -> Result<bool> {
    if !(e0 > T::zero()) {
        return Err(WaveError::InvalidArgument("initial energy must be positive".into()));
    }
    let k = observability_budget(g, horizon, mode)?.direct_constant;
    let norm: T = controls.iter().map(|c| c.l2_norm_sqr()).sum();
    Ok(norm <= k * e0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualityReport<T> {
    /// `int psi_t(t0) phi0 - psi(t0) phi1 dx`.
    pub pairing: T,
    /// `sum_sides (1 - ell^2) int phi_x^2 dt`.
    pub trace_integral: T,
}

/// Continuous duality check for a series solution: `psi` solves the
/// backward problem with zero terminal data and boundary values equal to
/// the traces of `phi`, computed by the characteristics solver.
pub fn duality_check<T: Real>(
    c: &SpectralCoefficients<T>,
    horizon: T,
    mode: EndpointMode,
    quad_n: usize,
) -> Result<DualityReport<T>> {
    let g = *c.geometry();
    let t1 = g.t0 + horizon;
    let sides: &[Side] = match mode {
        EndpointMode::OneEndpoint => &[Side::Right],
        EndpointMode::TwoEndpoint => &[Side::Left, Side::Right],
    };
    let shared = Arc::new(c.clone());
    let ctrls: Vec<ControlFunction<T>> = sides
        .iter()
        .map(|&side| {
            let (c1, c2) = (shared.clone(), shared.clone());
            let sign = outward_sign::<T>(side);
            ControlFunction::analytic(
                side,
                g.t0,
                t1,
                2,
                Arc::new(move |t| sign * c1.boundary_trace(side, t)),
                Arc::new(move |t| sign * c2.boundary_trace_derivative(side, t)),
            )
        })
        .collect::<Result<_>>()?;
    let controls = Controls {
        left: ctrls.iter().find(|k| k.side == Side::Left),
        right: ctrls.iter().find(|k| k.side == Side::Right),
    };
    let zero: Func<T> = Arc::new(|_| T::zero());
    let terminal = InitialData::on_interval(g.interval_at(t1)?, zero.clone(), zero.clone(), Some(zero));
    let psi = Oracle::terminal(&g, t1, &terminal, 8)?;
    let (a, b) = g.initial_interval();
    let pairing = composite_nodes(a, b, quad_n, &[])
        .par_iter()
        .map(|&(x, w)| -> Result<T> {
            let p = psi.evaluate(x, g.t0, &controls)?;
            let f = c.evaluate(x, g.t0)?;
            Ok(w * (p.phi_t * f.phi - p.phi * f.phi_t))
        })
        .collect::<Result<Vec<T>>>()?
        .into_iter()
        .sum();
    let mut trace_integral = T::zero();
    for &side in sides {
        let q = T::one() - g.speed(side) * g.speed(side);
        let breaks = generation_breaks(&g, side, t1);
        let s = integrate_until_stable(
            |t| {
                let v = c.boundary_trace(side, t);
                v * v
            },
            g.t0,
            t1,
            quad_n,
            1 << 20,
            T::lit(1e-14),
            &breaks,
        );
        trace_integral = trace_integral + q * s.value;
    }
    Ok(DualityReport { pairing, trace_integral })
}
