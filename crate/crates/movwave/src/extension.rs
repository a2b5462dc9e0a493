//! Initial data on `I_{t0}` and their reflected extensions onto the enlarged
//! intervals `(-L1 t0, ell2 t0)` and `(-ell1 t0, L2 t0)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Result, WaveError};
use crate::geometry::DomainGeometry;
use crate::interp::CubicSpline;
use crate::quadrature;
use crate::scalar::Real;

/// Shared real function handle.
pub type Func<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// Initial position and velocity on `[-ell1 t0, ell2 t0]`.
#[derive(Clone)]
pub struct InitialData<T: Real> {
    phi0: Func<T>,
    phi1: Func<T>,
    phi0_x: Option<Func<T>>,
    bounds: (T, T),
}

impl<T: Real> fmt::Debug for InitialData<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InitialData")
            .field("bounds", &self.bounds)
            .field("analytic_derivative", &self.phi0_x.is_some())
            .finish()
    }
}

impl<T: Real> InitialData<T> {
    /// Builds data from handles. `phi0` must vanish at both endpoints (relative
    /// to its sampled maximum, tolerance 1e-8).
    pub fn new(g: &DomainGeometry<T>, phi0: Func<T>, phi1: Func<T>, phi0_x: Option<Func<T>>) -> Result<Self> {
        let d = Self { phi0, phi1, phi0_x, bounds: g.initial_interval() };
        d.check_compatibility()?;
        Ok(d)
    }

    /// Data on an arbitrary interval `bounds` (for instance a terminal line),
    /// without the endpoint compatibility check.
    pub fn on_interval(bounds: (T, T), phi0: Func<T>, phi1: Func<T>, phi0_x: Option<Func<T>>) -> Self {
        Self { phi0, phi1, phi0_x, bounds }
    }

    /// Identically zero data.
    pub fn zero(g: &DomainGeometry<T>) -> Self {
        let z: Func<T> = Arc::new(|_| T::zero());
        Self { phi0: z.clone(), phi1: z.clone(), phi0_x: Some(z), bounds: g.initial_interval() }
    }

    /// Grid-backed data interpolated by natural cubic splines.
    pub fn from_samples(g: &DomainGeometry<T>, xs: Vec<T>, phi0: Vec<T>, phi1: Vec<T>) -> Result<Self> {
        let s0 = Arc::new(CubicSpline::new(xs.clone(), phi0)?);
        let s1 = Arc::new(CubicSpline::new(xs, phi1)?);
        let (a, b) = g.initial_interval();
        let (lo, hi) = s0.domain();
        let tol = T::lit(1e-9) * (b - a);
        if (lo - a).abs() > tol || (hi - b).abs() > tol {
            return Err(WaveError::InvalidArgument(format!(
                "samples span [{lo}, {hi}] but the initial interval is [{a}, {b}]"
            )));
        }
        let d0 = s0.clone();
        Self::new(
            g,
            Arc::new(move |x| s0.eval(x)),
            Arc::new(move |x| s1.eval(x)),
            Some(Arc::new(move |x| d0.derivative(x))),
        )
    }

    fn check_compatibility(&self) -> Result<()> {
        let (a, b) = self.bounds;
        let scale = (0..=64).map(|k| (self.phi0)(a + (b - a) * T::of(k) / T::lit(64.0)).abs()).fold(T::zero(), T::max);
        let tol = T::lit(1e-8) * scale.max(T::one());
        let (pa, pb) = ((self.phi0)(a), (self.phi0)(b));
        if !pa.is_finite() || !pb.is_finite() {
            return Err(WaveError::NonFinite("phi0 at an endpoint".into()));
        }
        if pa.abs() > tol || pb.abs() > tol {
            return Err(WaveError::InvalidArgument(format!("phi0 must vanish at the endpoints (got {pa}, {pb})")));
        }
        Ok(())
    }

    pub fn bounds(&self) -> (T, T) {
        self.bounds
    }

    pub fn phi0(&self, x: T) -> T {
        (self.phi0)(x)
    }

    pub fn phi1(&self, x: T) -> T {
        (self.phi1)(x)
    }

    /// Analytic derivative when supplied, otherwise fourth-order differences
    /// with step `len * 1e-5`, one-sided within two steps of an endpoint.
    pub fn phi0_x(&self, x: T) -> T {
        if let Some(d) = &self.phi0_x {
            return d(x);
        }
        let (a, b) = self.bounds;
        let h = (b - a) * T::lit(1e-5);
        let f = |k: i32| (self.phi0)(x + h * T::from_i32(k).expect("small int"));
        let two = T::lit(2.0);
        if x - a < two * h {
            (T::lit(-25.0) * f(0) + T::lit(48.0) * f(1) - T::lit(36.0) * f(2) + T::lit(16.0) * f(3)
                - T::lit(3.0) * f(4))
                / (T::lit(12.0) * h)
        } else if b - x < two * h {
            (T::lit(25.0) * f(0) - T::lit(48.0) * f(-1) + T::lit(36.0) * f(-2) - T::lit(16.0) * f(-3)
                + T::lit(3.0) * f(-4))
                / (T::lit(12.0) * h)
        } else {
            (f(-2) - T::lit(8.0) * f(-1) + T::lit(8.0) * f(1) - f(2)) / (T::lit(12.0) * h)
        }
    }

    pub fn has_analytic_derivative(&self) -> bool {
        self.phi0_x.is_some()
    }

    /// `a*self + b*other`, pointwise.
    pub fn combine(&self, a: T, other: &Self, b: T) -> Self {
        let (p, q) = (self.clone(), other.clone());
        let (p1, q1) = (self.clone(), other.clone());
        let (p2, q2) = (self.clone(), other.clone());
        Self {
            phi0: Arc::new(move |x| a * p.phi0(x) + b * q.phi0(x)),
            phi1: Arc::new(move |x| a * p1.phi1(x) + b * q1.phi1(x)),
            phi0_x: Some(Arc::new(move |x| a * p2.phi0_x(x) + b * q2.phi0_x(x))),
            bounds: self.bounds,
        }
    }

    /// Energy `(1/2) * int (phi0_x^2 + phi1^2)` on the initial interval.
    pub fn energy(&self, quad_n: usize) -> T {
        let (a, b) = self.bounds;
        let half = T::lit(0.5);
        quadrature::integrate(|x| half * (self.phi0_x(x).powi(2) + self.phi1(x).powi(2)), a, b, quad_n, &[])
    }
}

/// The reflected extensions used by the coefficient formulas.
#[derive(Debug, Clone)]
pub struct ExtendedData<T: Real> {
    geometry: DomainGeometry<T>,
    data: InitialData<T>,
    r1: T,
    r2: T,
}

/// Extends `d` by odd-like (velocity) and even-like (slope) reflections about
/// the endpoints of the initial interval.
pub fn extend<T: Real>(g: &DomainGeometry<T>, d: &InitialData<T>) -> ExtendedData<T> {
    let one = T::one();
    ExtendedData {
        geometry: *g,
        data: d.clone(),
        r1: (one - g.ell1) / (one + g.ell1),
        r2: (one - g.ell2) / (one + g.ell2),
    }
}

/// Piece of the enlarged interval a point falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Piece {
    LeftImage,
    Core,
    RightImage,
}

impl<T: Real> ExtendedData<T> {
    pub fn geometry(&self) -> &DomainGeometry<T> {
        &self.geometry
    }

    pub fn data(&self) -> &InitialData<T> {
        &self.data
    }

    /// `(-L1 t0, L2 t0)`.
    pub fn domain(&self) -> (T, T) {
        let g = &self.geometry;
        (-g.big_l1 * g.t0, g.big_l2 * g.t0)
    }

    /// Map from `(-L1 t0, -ell1 t0)` into the core interval.
    pub fn left_map(&self, x: T) -> T {
        let t0 = self.geometry.t0;
        -t0 + self.r1 * (t0 - x)
    }

    /// Inverse of [`Self::left_map`].
    pub fn left_map_inverse(&self, y: T) -> T {
        let t0 = self.geometry.t0;
        t0 - (y + t0) / self.r1
    }

    /// Map from `(ell2 t0, L2 t0)` into the core interval.
    pub fn right_map(&self, x: T) -> T {
        let t0 = self.geometry.t0;
        t0 - self.r2 * (t0 + x)
    }

    /// Inverse of [`Self::right_map`].
    pub fn right_map_inverse(&self, y: T) -> T {
        let t0 = self.geometry.t0;
        (t0 - y) / self.r2 - t0
    }

    fn piece(&self, x: T) -> Result<Piece> {
        let (lo, hi) = self.domain();
        let (a, b) = self.geometry.initial_interval();
        let slack = T::lit(64.0) * T::epsilon() * (T::one() + hi - lo);
        if !x.is_finite() || x < lo - slack || x > hi + slack {
            return Err(WaveError::OutsideDomain { x: x.to_f64_lossy(), t: self.geometry.t0.to_f64_lossy() });
        }
        Ok(if x < a {
            Piece::LeftImage
        } else if x > b {
            Piece::RightImage
        } else {
            Piece::Core
        })
    }

    fn clamp_core(&self, y: T) -> T {
        let (a, b) = self.geometry.initial_interval();
        y.max(a).min(b)
    }

    /// Extended velocity.
    pub fn ext_phi1(&self, x: T) -> Result<T> {
        Ok(match self.piece(x)? {
            Piece::Core => self.data.phi1(x),
            Piece::LeftImage => -self.r1 * self.data.phi1(self.clamp_core(self.left_map(x))),
            Piece::RightImage => -self.r2 * self.data.phi1(self.clamp_core(self.right_map(x))),
        })
    }

    /// Extended slope.
    pub fn ext_phi0_x(&self, x: T) -> Result<T> {
        Ok(match self.piece(x)? {
            Piece::Core => self.data.phi0_x(x),
            Piece::LeftImage => self.r1 * self.data.phi0_x(self.clamp_core(self.left_map(x))),
            Piece::RightImage => self.r2 * self.data.phi0_x(self.clamp_core(self.right_map(x))),
        })
    }

    /// Left/right limits of the extended velocity at a pivot.
    pub fn phi1_one_sided(&self, x: T, from_outside: bool) -> Result<T> {
        let (a, b) = self.geometry.initial_interval();
        if !from_outside {
            return self.ext_phi1(x);
        }
        if (x - a).abs() <= (x - b).abs() {
            Ok(-self.r1 * self.data.phi1(self.clamp_core(self.left_map(x))))
        } else {
            Ok(-self.r2 * self.data.phi1(self.clamp_core(self.right_map(x))))
        }
    }

    /// Antiderivative of the extended slope, anchored at `-ell1 t0`; vanishes at
    /// `ell2 t0` for compatible data.
    pub fn ext_phi0(&self, x: T, quad_n: usize) -> Result<T> {
        self.piece(x)?;
        let (a, b) = self.geometry.initial_interval();
        let f = |y: T| self.ext_phi0_x(y).unwrap_or_else(|_| T::zero());
        Ok(if x < a {
            -quadrature::integrate(f, x, a, quad_n, &[])
        } else {
            quadrature::integrate(f, a, x, quad_n, &[b])
        })
    }
}
