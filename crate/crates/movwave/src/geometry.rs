//! The expanding interval `(-ell1 t, ell2 t)` and its derived constants.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};
use crate::scalar::Real;

/// Which moving endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// Raw geometry parameters as they appear in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub ell1: f64,
    pub ell2: f64,
    #[serde(rename = "L0")]
    pub l0: f64,
}

/// Immutable geometry; all constants are computed once at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DomainGeometry<T> {
    pub ell1: T,
    pub ell2: T,
    #[serde(rename = "L0")]
    pub l0: T,
    pub t0: T,
    pub alpha: T,
    pub beta: T,
    pub kappa: T,
    #[serde(rename = "L1")]
    pub big_l1: T,
    #[serde(rename = "L2")]
    pub big_l2: T,
    pub l_min: T,
    #[serde(rename = "L_max")]
    pub l_max: T,
    #[serde(rename = "T_obs1")]
    pub t_obs1: T,
    #[serde(rename = "T_obs2")]
    pub t_obs2: T,
}

impl<T: Real> DomainGeometry<T> {
    pub fn new(ell1: T, ell2: T, l0: T) -> Result<Self> {
        let one = T::one();
        let zero = T::zero();
        for (name, v) in [("ell1", ell1), ("ell2", ell2), ("L0", l0)] {
            if !v.is_finite() {
                return Err(WaveError::InvalidGeometry(format!("{name} is not finite")));
            }
        }
        for (name, v) in [("ell1", ell1), ("ell2", ell2)] {
            if v < zero || v >= one {
                return Err(WaveError::InvalidGeometry(format!("{name} = {v} must lie in [0, 1)")));
            }
        }
        if ell1 + ell2 <= zero {
            return Err(WaveError::InvalidGeometry("ell1 + ell2 must be positive".to_string()));
        }
        if l0 <= zero {
            return Err(WaveError::InvalidGeometry(format!("L0 = {l0} must be positive")));
        }

        let t0 = l0 / (ell1 + ell2);
        let alpha = (one + ell1) / (one - ell2);
        let beta = (one + ell2) / (one - ell1);
        let ab = alpha * beta;
        let two = T::lit(2.0);
        let kappa = two / ab.ln();
        let big_l1 = (one - ell2) * ab - one;
        let big_l2 = (one - ell1) * ab - one;
        let t_obs1 = two * l0 / ((one - ell1) * (one - ell2));
        let t_obs2 = (l0 / (one - ell1)).max(l0 / (one - ell2));

        let g = Self {
            ell1,
            ell2,
            l0,
            t0,
            alpha,
            beta,
            kappa,
            big_l1,
            big_l2,
            l_min: ell1.min(ell2),
            l_max: ell1.max(ell2),
            t_obs1,
            t_obs2,
        };
        let (d1, d2) = g.sharp_time_discrepancy();
        let tol = T::epsilon() * T::lit(64.0);
        if d1 > tol || d2 > tol {
            return Err(WaveError::InvalidGeometry(format!("sharp-time closed forms disagree (relative {d1}, {d2})")));
        }
        Ok(g)
    }

    pub fn from_spec(spec: &GeometrySpec) -> Result<Self> {
        Self::new(T::lit(spec.ell1), T::lit(spec.ell2), T::lit(spec.l0))
    }

    /// alpha * beta, the multiplicative period of the boundary dynamics.
    pub fn alpha_beta(&self) -> T {
        self.alpha * self.beta
    }

    /// Relative gaps between the two closed forms of `T_obs1` and of `T_obs2`.
    pub fn sharp_time_discrepancy(&self) -> (T, T) {
        let one = T::one();
        let alt1 = (self.alpha_beta() - one) * self.t0;
        let alt2 = (self.alpha.max(self.beta) - one) * self.t0;
        (((alt1 - self.t_obs1) / self.t_obs1).abs(), ((alt2 - self.t_obs2) / self.t_obs2).abs())
    }

    /// Speed of the given endpoint.
    pub fn speed(&self, side: Side) -> T {
        match side {
            Side::Left => self.ell1,
            Side::Right => self.ell2,
        }
    }

    /// `(1 + ell) / (1 - ell)` for the given endpoint: the factor by which a
    /// reflection there stretches the characteristic coordinate.
    pub fn reflection_factor(&self, side: Side) -> T {
        let e = self.speed(side);
        (T::one() + e) / (T::one() - e)
    }

    /// The interval `I_t = (-ell1 t, ell2 t)`.
    pub fn interval_at(&self, t: T) -> Result<(T, T)> {
        if !(t >= self.t0) {
            return Err(WaveError::BeforeInitialTime { t: t.to_f64_lossy(), t0: self.t0.to_f64_lossy() });
        }
        Ok(self.interval_unchecked(t))
    }

    pub(crate) fn interval_unchecked(&self, t: T) -> (T, T) {
        (-self.ell1 * t, self.ell2 * t)
    }

    /// Whether `(x, t)` lies in the closed space-time domain, with relative slack `tol`.
    pub fn contains(&self, x: T, t: T, tol: T) -> bool {
        let (a, b) = self.interval_unchecked(t);
        let slack = tol * (T::one() + t.abs());
        t >= self.t0 - slack && x >= a - slack && x <= b + slack
    }

    /// Initial interval `(-ell1 t0, ell2 t0)`.
    pub fn initial_interval(&self) -> (T, T) {
        self.interval_unchecked(self.t0)
    }

    /// Left-enlarged interval `(-L1 t0, ell2 t0)`.
    pub fn minus_interval(&self) -> (T, T) {
        (-self.big_l1 * self.t0, self.ell2 * self.t0)
    }

    /// Right-enlarged interval `(-ell1 t0, L2 t0)`.
    pub fn plus_interval(&self) -> (T, T) {
        (-self.ell1 * self.t0, self.big_l2 * self.t0)
    }

    /// Convert to another scalar type.
    pub fn cast<U: Real>(&self) -> Result<DomainGeometry<U>> {
        DomainGeometry::new(
            U::lit(self.ell1.to_f64_lossy()),
            U::lit(self.ell2.to_f64_lossy()),
            U::lit(self.l0.to_f64_lossy()),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g1() -> DomainGeometry<f64> {
        DomainGeometry::new(0.1, 0.3, 1.0).unwrap()
    }

    #[test]
    fn reference_constants_match_exact_rationals() {
        let g = g1();
        assert!((g.t0 - 2.5).abs() < 1e-15);
        assert!((g.alpha - 11.0 / 7.0).abs() < 1e-15);
        assert!((g.beta - 13.0 / 9.0).abs() < 1e-15);
        assert!((g.alpha_beta() - 143.0 / 63.0).abs() < 1e-15);
        assert!((g.kappa - 2.0 / (143.0f64 / 63.0).ln()).abs() < 1e-14);
        assert!((g.kappa - 2.4398876).abs() < 1e-6);
        assert!((g.big_l1 - 53.0 / 90.0).abs() < 1e-15);
        assert!((g.big_l2 - 73.0 / 70.0).abs() < 1e-15);
        assert!((g.t_obs1 - 200.0 / 63.0).abs() < 1e-14);
        assert!((g.t_obs2 - 10.0 / 7.0).abs() < 1e-14);
        assert_eq!(g.l_min, 0.1);
        assert_eq!(g.l_max, 0.3);
    }

    #[test]
    fn fixed_left_wall_collapses_left_extension() {
        let g = DomainGeometry::<f64>::new(0.0, 0.5, 1.0).unwrap();
        assert_eq!(g.alpha, 2.0);
        assert_eq!(g.beta, 1.5);
        assert!((g.big_l1 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn symmetric_speeds_give_equal_factors() {
        let g = DomainGeometry::<f64>::new(0.3, 0.3, 1.0).unwrap();
        assert_eq!(g.alpha, g.beta);
        assert!((g.alpha - 13.0 / 7.0).abs() < 1e-15);
        assert!((g.t0 - 5.0 / 3.0).abs() < 1e-15);
        assert!((g.t_obs2 - (13.0 / 7.0 - 1.0) * 5.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(DomainGeometry::new(1.0, 0.3, 1.0).is_err());
        assert!(DomainGeometry::new(0.1, 1.0, 1.0).is_err());
        assert!(DomainGeometry::new(-0.1, 0.3, 1.0).is_err());
        assert!(DomainGeometry::new(0.0, 0.0, 1.0).is_err());
        assert!(DomainGeometry::new(0.1, 0.3, 0.0).is_err());
        assert!(DomainGeometry::new(0.1, 0.3, -1.0).is_err());
        assert!(DomainGeometry::new(f64::NAN, 0.3, 1.0).is_err());
    }

    #[test]
    fn interval_queries() {
        let g = g1();
        let (a, b) = g.interval_at(2.5).unwrap();
        assert!((a + 0.25).abs() < 1e-15 && (b - 0.75).abs() < 1e-15);
        assert!((b - a - 1.0).abs() < 1e-15);
        assert_eq!(g.interval_at(5.0).unwrap(), (-0.5, 1.5));
        assert!(g.interval_at(2.4).is_err());
    }

    #[test]
    fn extension_interval_ordering() {
        let g = g1();
        assert!(-g.big_l1 < -g.ell1 && -g.ell1 < g.ell2 && g.ell2 < g.big_l2);
        assert!((g.kappa * g.alpha_beta().ln() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn single_precision_geometry() {
        let g = DomainGeometry::<f32>::new(0.1, 0.3, 1.0).unwrap();
        assert!((g.t_obs1 - 200.0 / 63.0).abs() < 1e-5);
    }
}
