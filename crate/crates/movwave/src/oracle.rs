//! Exact solver by characteristics: `phi = F(t + x) + H(t - x)`, with the
//! invariants continued across the moving walls by affine, sign-flipping
//! reflections. Boundary data enter at each wall hit.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, WaveError};
use crate::extension::InitialData;
use crate::geometry::{DomainGeometry, Side};
use crate::hum::Controls;
use crate::interp::UniformCubic;
use crate::quadrature::GaussLegendre;
use crate::scalar::Real;
use crate::spectral::{FieldSample, Provenance, WaveField};

/// Default number of samples in the interpolation tables.
pub const DEFAULT_TABLE_SAMPLES: usize = 4096;

/// Reflection law at a wall: the right wall maps `u = t - x` to
/// `w = t + x = ((1+ell2)/(1-ell2)) u`; the left wall maps `w` to
/// `u = ((1+ell1)/(1-ell1)) w`.
pub fn reflect<T: Real>(g: &DomainGeometry<T>, side: Side, invariant: T) -> T {
    g.reflection_factor(side) * invariant
}

/// Which characteristic coordinate an invariant is a function of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Function of `w = t + x`.
    Plus,
    /// Function of `u = t - x`.
    Minus,
}

/// One wall hit along a traced characteristic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Reflection<T> {
    pub side: Side,
    pub time: T,
    /// Weight of the boundary value `v(time)` in the invariant's value.
    pub value_weight: T,
    /// Weight of `v'(time)` in the invariant's derivative.
    pub derivative_weight: T,
}

/// A characteristic followed from a query point to the data line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayTrace<T> {
    pub family: Family,
    pub start: T,
    pub reflections: Vec<Reflection<T>>,
    /// Family and coordinate where the ray meets the data line.
    pub foot_family: Family,
    pub foot: T,
    /// Net sign applied to the foot value.
    pub parity: T,
    /// Net factor applied to the foot derivative.
    pub derivative_factor: T,
}

/// Direction of tracing relative to the data line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    /// Data at the earliest time; characteristics traced back in time.
    Backward,
    /// Data at the latest time; characteristics traced forward in time.
    Forward,
}

const MAX_REFLECTIONS: usize = 100_000;

/// Backward trace of the invariant `family` at `start` to the line `t = line`.
pub(crate) fn trace_to_initial_line<T: Real>(
    g: &DomainGeometry<T>,
    line: T,
    family: Family,
    start: T,
) -> Result<RayTrace<T>> {
    trace(g, line, Direction::Backward, family, start)
}

fn trace<T: Real>(g: &DomainGeometry<T>, line: T, dir: Direction, family: Family, start: T) -> Result<RayTrace<T>> {
    let one = T::one();
    let (rho1, rho2) = (g.reflection_factor(Side::Left), g.reflection_factor(Side::Right));
    let mut fam = family;
    let mut arg = start;
    let mut vw = one;
    let mut dw = one;
    let mut reflections = Vec::new();
    let slack = T::lit(8.0) * T::epsilon() * line;
    loop {
        if reflections.len() > MAX_REFLECTIONS || !arg.is_finite() {
            return Err(WaveError::NonFinite("characteristic did not reach the data line".into()));
        }
        let hit = match (dir, fam) {
            // Data line at `line`, tracing back: w in [(1-ell1) line, (1+ell2) line].
            (Direction::Backward, Family::Plus) => {
                if arg <= (one + g.ell2) * line + slack {
                    None
                } else {
                    let tau = arg / (one + g.ell2);
                    Some((Side::Right, tau, one / (one + g.ell2), one / rho2, Family::Minus, arg / rho2))
                }
            }
            (Direction::Backward, Family::Minus) => {
                if arg <= (one + g.ell1) * line + slack {
                    None
                } else {
                    let tau = arg / (one + g.ell1);
                    Some((Side::Left, tau, one / (one + g.ell1), one / rho1, Family::Plus, arg / rho1))
                }
            }
            // Data line at `line`, tracing forward: w >= (1-ell1) line.
            (Direction::Forward, Family::Plus) => {
                if arg >= (one - g.ell1) * line - slack {
                    None
                } else {
                    let tau = arg / (one - g.ell1);
                    Some((Side::Left, tau, one / (one - g.ell1), rho1, Family::Minus, arg * rho1))
                }
            }
            (Direction::Forward, Family::Minus) => {
                if arg >= (one - g.ell2) * line - slack {
                    None
                } else {
                    let tau = arg / (one - g.ell2);
                    Some((Side::Right, tau, one / (one - g.ell2), rho2, Family::Plus, arg * rho2))
                }
            }
        };
        match hit {
            None => {
                return Ok(RayTrace {
                    family,
                    start,
                    reflections,
                    foot_family: fam,
                    foot: arg,
                    parity: vw,
                    derivative_factor: dw,
                })
            }
            Some((side, tau, dv_scale, chain, next_fam, next_arg)) => {
                reflections.push(Reflection { side, time: tau, value_weight: vw, derivative_weight: dw * dv_scale });
                vw = -vw;
                dw = -dw * chain;
                fam = next_fam;
                arg = next_arg;
            }
        }
    }
}

/// Invariants `F`, `H` and their derivatives on a data line `t = tau`,
/// tabulated for cubic interpolation.
#[derive(Debug, Clone)]
struct LineInvariants<T> {
    tau: T,
    phi0: UniformCubic<T>,
    big_phi1: UniformCubic<T>,
    phi0_x: UniformCubic<T>,
    phi1: UniformCubic<T>,
    a: T,
    b: T,
}

impl<T: Real> LineInvariants<T> {
    fn new(tau: T, d: &InitialData<T>, n: usize) -> Result<Self> {
        let (a, b) = d.bounds();
        let n = n.max(4);
        let phi0 = UniformCubic::sample(|x| d.phi0(x), a, b, n);
        let phi0_x = UniformCubic::sample(|x| d.phi0_x(x), a, b, n);
        let phi1 = UniformCubic::sample(|x| d.phi1(x), a, b, n);
        // Running integral of phi1, four-point Gauss per cell.
        let gl = GaussLegendre::cached(4);
        let h = (b - a) / T::of(n - 1);
        let mut acc = T::zero();
        let mut cum = Vec::with_capacity(n);
        cum.push(T::zero());
        for i in 1..n {
            let lo = a + h * T::of(i - 1);
            let mid = lo + h / T::lit(2.0);
            let s: T = gl
                .nodes
                .iter()
                .zip(&gl.weights)
                .map(|(x, w)| T::lit(*w) * d.phi1(mid + h / T::lit(2.0) * T::lit(*x)))
                .sum();
            acc = acc + s * h / T::lit(2.0);
            cum.push(acc);
        }
        if cum.iter().any(|v| !v.is_finite()) {
            return Err(WaveError::NonFinite("initial data".into()));
        }
        let big_phi1 = UniformCubic::from_values(a, b, cum);
        Ok(Self { tau, phi0, big_phi1, phi0_x, phi1, a, b })
    }

    fn clamp(&self, x: T) -> T {
        x.max(self.a).min(self.b)
    }

    /// Value and derivative of the invariant of `family` at coordinate `arg`
    /// on the data line.
    fn foot(&self, family: Family, arg: T) -> (T, T) {
        let half = T::lit(0.5);
        match family {
            Family::Plus => {
                let x = self.clamp(arg - self.tau);
                (half * (self.phi0.eval(x) + self.big_phi1.eval(x)), half * (self.phi0_x.eval(x) + self.phi1.eval(x)))
            }
            Family::Minus => {
                let x = self.clamp(self.tau - arg);
                (half * (self.phi0.eval(x) - self.big_phi1.eval(x)), half * (self.phi1.eval(x) - self.phi0_x.eval(x)))
            }
        }
    }
}

/// Characteristics solver for data given on one time line.
#[derive(Debug, Clone)]
pub struct Oracle<T> {
    geometry: DomainGeometry<T>,
    line: LineInvariants<T>,
    direction: Direction,
}

impl<T: Real> Oracle<T> {
    /// Solver for initial data at `t0`, tables with `samples` points.
    pub fn new(g: &DomainGeometry<T>, d: &InitialData<T>, samples: usize) -> Result<Self> {
        Ok(Self { geometry: *g, line: LineInvariants::new(g.t0, d, samples)?, direction: Direction::Backward })
    }

    /// Solver for terminal data on `I_{t_end}`, used for backward problems.
    pub fn terminal(g: &DomainGeometry<T>, t_end: T, d: &InitialData<T>, samples: usize) -> Result<Self> {
        if !(t_end >= g.t0) {
            return Err(WaveError::BeforeInitialTime { t: t_end.to_f64_lossy(), t0: g.t0.to_f64_lossy() });
        }
        let expected = g.interval_unchecked(t_end);
        let (a, b) = d.bounds();
        let tol = T::lit(1e-9) * (T::one() + t_end);
        if (a - expected.0).abs() > tol || (b - expected.1).abs() > tol {
            return Err(WaveError::InvalidArgument("terminal data must live on the terminal interval".into()));
        }
        Ok(Self { geometry: *g, line: LineInvariants::new(t_end, d, samples)?, direction: Direction::Forward })
    }

    pub fn geometry(&self) -> &DomainGeometry<T> {
        &self.geometry
    }

    /// Time of the data line.
    pub fn data_time(&self) -> T {
        self.line.tau
    }

    fn check(&self, x: T, t: T) -> Result<()> {
        let g = &self.geometry;
        let tol = T::lit(16.0) * T::epsilon();
        let inside = g.contains(x, t, tol)
            && match self.direction {
                Direction::Backward => true,
                Direction::Forward => t <= self.line.tau * (T::one() + tol),
            };
        if !inside || !x.is_finite() || !t.is_finite() {
            return Err(WaveError::OutsideDomain { x: x.to_f64_lossy(), t: t.to_f64_lossy() });
        }
        Ok(())
    }

    /// The two characteristics through `(x, t)`.
    pub fn trace_rays(&self, x: T, t: T) -> Result<(RayTrace<T>, RayTrace<T>)> {
        self.check(x, t)?;
        let g = &self.geometry;
        Ok((
            trace(g, self.line.tau, self.direction, Family::Plus, t + x)?,
            trace(g, self.line.tau, self.direction, Family::Minus, t - x)?,
        ))
    }

    fn invariant(&self, ray: &RayTrace<T>, controls: &Controls<'_, T>) -> (T, T) {
        let (f, df) = self.line.foot(ray.foot_family, ray.foot);
        let mut v = ray.parity * f;
        let mut dv = ray.derivative_factor * df;
        for r in &ray.reflections {
            if let Some(c) = controls.get(r.side) {
                v = v + r.value_weight * c.value(r.time);
                dv = dv + r.derivative_weight * c.derivative(r.time);
            }
        }
        (v, dv)
    }

    /// Solution at one point with optional boundary data.
    pub fn evaluate(&self, x: T, t: T, controls: &Controls<'_, T>) -> Result<FieldSample<T>> {
        let (rp, rm) = self.trace_rays(x, t)?;
        let (f, df) = self.invariant(&rp, controls);
        let (h, dh) = self.invariant(&rm, controls);
        Ok(FieldSample { x, t, phi: f + h, phi_x: df - dh, phi_t: df + dh })
    }

    /// Homogeneous Dirichlet problem on a set of points.
    pub fn solve_homogeneous(&self, pts: &[(T, T)]) -> Result<WaveField<T>> {
        self.solve_boundary_forced(&Controls::none(), pts)
    }

    /// Problem with boundary values `phi(-ell1 t, t) = v_left(t)`, `phi(ell2 t, t) = v_right(t)`.
    pub fn solve_boundary_forced(&self, controls: &Controls<'_, T>, pts: &[(T, T)]) -> Result<WaveField<T>> {
        let samples = pts.par_iter().map(|&(x, t)| self.evaluate(x, t, controls)).collect::<Result<Vec<_>>>()?;
        Ok(WaveField { provenance: Provenance::Oracle, samples })
    }

    /// `phi_x` at a wall.
    pub fn boundary_trace(&self, side: Side, t: T, controls: &Controls<'_, T>) -> Result<T> {
        let x = match side {
            Side::Left => -self.geometry.ell1 * t,
            Side::Right => self.geometry.ell2 * t,
        };
        Ok(self.evaluate(x, t, controls)?.phi_x)
    }

    /// Energy at time `t` by doubling Gauss–Legendre quadrature.
    pub fn energy(&self, t: T, controls: &Controls<'_, T>, quad_n: usize, tol: T) -> Result<T> {
        let (a, b) = self.geometry.interval_at(t)?;
        self.check(a, t)?;
        let f = |x: T| {
            let s = self.evaluate(x, t, controls).expect("node inside the interval");
            (s.phi_x, s.phi_t)
        };
        Ok(crate::energy::energy_until_stable(a, b, quad_n, tol, &f).0)
    }
}

/// Backward problem: terminal data at `t_end`, boundary data `controls`,
/// evaluated at `pts` with `t0 <= t <= t_end`.
pub fn solve_backward<T: Real>(
    g: &DomainGeometry<T>,
    t_end: T,
    terminal: &InitialData<T>,
    controls: &Controls<'_, T>,
    pts: &[(T, T)],
    samples: usize,
) -> Result<WaveField<T>> {
    Oracle::terminal(g, t_end, terminal, samples)?.solve_boundary_forced(controls, pts)
}

/// Upper bound on the number of wall hits for a backward trace from `(x, t)`.
pub fn reflection_bound<T: Real>(g: &DomainGeometry<T>, t: T) -> usize {
    let one = T::one();
    let xmax = g.ell1.max(g.ell2) * t;
    let min_factor = g.reflection_factor(Side::Left).min(g.reflection_factor(Side::Right));
    let r = ((t + xmax) / (g.t0 * (one - g.l_max))).ln() / min_factor.ln();
    r.ceil().to_usize().unwrap_or(usize::MAX)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflection_factors() {
        let g = DomainGeometry::<f64>::new(0.1, 0.3, 1.0).unwrap();
        assert!((reflect(&g, Side::Right, 1.0) - 13.0 / 7.0).abs() < 1e-15);
        assert!((reflect(&g, Side::Left, 1.0) - 11.0 / 9.0).abs() < 1e-15);
        let g0 = DomainGeometry::<f64>::new(0.0, 0.5, 1.0).unwrap();
        assert_eq!(reflect(&g0, Side::Left, 0.7), 0.7);
    }
}
