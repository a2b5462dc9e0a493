//! Natural cubic spline interpolation on sorted nodes.

use crate::error::{Result, WaveError};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct CubicSpline<T> {
    xs: Vec<T>,
    ys: Vec<T>,
    m: Vec<T>,
    uniform: Option<T>,
}

impl<T: Real> CubicSpline<T> {
    pub fn new(xs: Vec<T>, ys: Vec<T>) -> Result<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return Err(WaveError::InvalidArgument("spline needs at least two nodes and matching values".into()));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(WaveError::NonFinite("spline samples".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(WaveError::InvalidArgument("spline nodes must increase".into()));
        }
        let two = T::lit(2.0);
        let six = T::lit(6.0);
        // Second derivatives via the tridiagonal system of a natural spline.
        let mut m = vec![T::zero(); n];
        if n > 2 {
            let mut c = vec![T::zero(); n];
            let mut d = vec![T::zero(); n];
            for i in 1..n - 1 {
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                let rhs = six * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
                let diag = two * (h0 + h1) - h0 * c[i - 1];
                c[i] = h1 / diag;
                d[i] = (rhs - h0 * d[i - 1]) / diag;
            }
            for i in (1..n - 1).rev() {
                m[i] = d[i] - c[i] * m[i + 1];
            }
        }
        let h = (xs[n - 1] - xs[0]) / T::of(n - 1);
        let uniform = xs
            .iter()
            .enumerate()
            .all(|(i, &x)| (x - (xs[0] + h * T::of(i))).abs() <= T::lit(1e-12) * (T::one() + x.abs()))
            .then_some(h);
        Ok(Self { xs, ys, m, uniform })
    }

    /// Samples `f` at `n` uniform nodes on [a, b] and interpolates.
    pub fn sample<F: Fn(T) -> T>(f: F, a: T, b: T, n: usize) -> Result<Self> {
        let h = (b - a) / T::of(n - 1);
        let xs: Vec<T> = (0..n).map(|i| if i + 1 == n { b } else { a + h * T::of(i) }).collect();
        let ys = xs.iter().map(|&x| f(x)).collect();
        Self::new(xs, ys)
    }

    pub fn domain(&self) -> (T, T) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    fn segment(&self, x: T) -> usize {
        let n = self.xs.len();
        let i = match self.uniform {
            Some(h) => ((x - self.xs[0]) / h).floor().to_usize().unwrap_or(0),
            None => self.xs.partition_point(|&p| p <= x).saturating_sub(1),
        };
        i.min(n - 2)
    }

    pub fn eval(&self, x: T) -> T {
        self.eval_with_derivative(x).0
    }

    pub fn derivative(&self, x: T) -> T {
        self.eval_with_derivative(x).1
    }

    pub fn eval_with_derivative(&self, x: T) -> (T, T) {
        let i = self.segment(x);
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        let a = (x1 - x) / h;
        let b = (x - x0) / h;
        let six = T::lit(6.0);
        let three = T::lit(3.0);
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let y = a * self.ys[i] + b * self.ys[i + 1] + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / six;
        let dy = (self.ys[i + 1] - self.ys[i]) / h - (three * a * a - T::one()) / six * h * m0
            + (three * b * b - T::one()) / six * h * m1;
        (y, dy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_smooth_function() {
        let s = CubicSpline::sample(|x: f64| x.sin(), 0.0, 3.0, 400).unwrap();
        for k in 1..50 {
            let x = 0.2 + 2.6 * k as f64 / 50.0;
            assert!((s.eval(x) - x.sin()).abs() < 1e-8);
            assert!((s.derivative(x) - x.cos()).abs() < 1e-5);
        }
    }

    #[test]
    fn nonuniform_nodes() {
        let xs: Vec<f64> = (0..200).map(|i| (i as f64 / 199.0).powi(2)).collect();
        let ys = xs.iter().map(|x| x * x * x).collect();
        let s = CubicSpline::new(xs, ys).unwrap();
        assert!((s.eval(0.5) - 0.125).abs() < 1e-5);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(CubicSpline::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(CubicSpline::new(vec![0.0], vec![1.0]).is_err());
        assert!(CubicSpline::new(vec![0.0, 1.0], vec![1.0, f64::NAN]).is_err());
    }
}

/// Uniformly sampled table with local four-point (cubic) Lagrange interpolation.
/// Fourth-order accurate everywhere, including near the ends.
#[derive(Debug, Clone)]
pub struct UniformCubic<T> {
    a: T,
    h: T,
    ys: Vec<T>,
}

impl<T: Real> UniformCubic<T> {
    pub fn sample<F: Fn(T) -> T>(f: F, a: T, b: T, n: usize) -> Self {
        assert!(n >= 4, "cubic table needs at least four samples");
        let h = (b - a) / T::of(n - 1);
        let ys = (0..n).map(|i| f(if i + 1 == n { b } else { a + h * T::of(i) })).collect();
        Self { a, h, ys }
    }

    pub fn from_values(a: T, b: T, ys: Vec<T>) -> Self {
        assert!(ys.len() >= 4, "cubic table needs at least four samples");
        let h = (b - a) / T::of(ys.len() - 1);
        Self { a, h, ys }
    }

    pub fn eval(&self, x: T) -> T {
        let n = self.ys.len();
        let s = (x - self.a) / self.h;
        let i = s.floor().to_isize().unwrap_or(0);
        let base = (i - 1).clamp(0, n as isize - 4) as usize;
        let u = s - T::of(base);
        let one = T::one();
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let six = T::lit(6.0);
        let (u0, u1, u2, u3) = (u, u - one, u - two, u - three);
        let y = &self.ys[base..base + 4];
        -y[0] * u1 * u2 * u3 / six + y[1] * u0 * u2 * u3 / two - y[2] * u0 * u1 * u3 / two + y[3] * u0 * u1 * u2 / six
    }
}

#[cfg(test)]
mod uniform_tests {
    use super::*;

    #[test]
    fn fourth_order_including_ends() {
        let t = UniformCubic::sample(|x: f64| x.exp(), 0.0, 1.0, 1001);
        for k in 0..=100 {
            let x = k as f64 / 100.0;
            assert!((t.eval(x) - x.exp()).abs() < 1e-12, "x={x}");
        }
        assert!((t.eval(0.00037) - 0.00037f64.exp()).abs() < 1e-13);
    }
}
