//! Named analytic initial data.

use std::sync::Arc;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};
use crate::extension::InitialData;
use crate::geometry::DomainGeometry;
use crate::scalar::Real;
use crate::spectral::SpectralCoefficients;

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn six() -> u32 {
    6
}
fn four() -> u32 {
    4
}
fn three() -> usize {
    3
}

/// Initial data presets. Positions are expressed through the normalized
/// coordinate `xi = (x + ell1 t0) / L0` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Preset {
    Zero,
    /// `phi0 = amplitude sin^power(pi xi)`, `phi1 = velocity sin^power(pi xi)`.
    SineBump {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "six")]
        power: u32,
        #[serde(default)]
        velocity: f64,
    },
    /// `phi0 = amplitude (4 xi (1 - xi))^power`, `phi1 = 0`.
    PolynomialBump {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "four")]
        power: u32,
    },
    /// Smooth compactly supported mollifier centred at `center` with full width `width` (both in xi).
    CompactBump {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "half")]
        center: f64,
        #[serde(default = "half")]
        width: f64,
    },
    /// Data of the series with `modes` random coefficients (and their conjugates).
    RandomModes {
        #[serde(default = "three")]
        modes: usize,
        #[serde(default)]
        seed: u64,
        #[serde(default = "one")]
        amplitude: f64,
    },
}

impl Preset {
    pub fn build<T: Real>(&self, g: &DomainGeometry<T>) -> Result<InitialData<T>> {
        let shift = g.ell1 * g.t0;
        let len = g.l0;
        let pi = T::PI();
        match *self {
            Preset::Zero => Ok(InitialData::zero(g)),
            Preset::SineBump { amplitude, power, velocity } => {
                if power == 0 {
                    return Err(WaveError::InvalidArgument("sine bump power must be at least 1".into()));
                }
                let (a, v) = (T::lit(amplitude), T::lit(velocity));
                let p = power as i32;
                let xi = move |x: T| pi * (x + shift) / len;
                Ok(InitialData::new(
                    g,
                    Arc::new(move |x| a * xi(x).sin().powi(p)),
                    Arc::new(move |x| v * xi(x).sin().powi(p)),
                    Some(Arc::new(move |x| {
                        let s = xi(x);
                        a * T::lit(p as f64) * s.sin().powi(p - 1) * s.cos() * pi / len
                    })),
                )?)
            }
            Preset::PolynomialBump { amplitude, power } => {
                if power == 0 {
                    return Err(WaveError::InvalidArgument("polynomial bump power must be at least 1".into()));
                }
                let a = T::lit(amplitude);
                let p = power as i32;
                let four = T::lit(4.0);
                let xi = move |x: T| (x + shift) / len;
                Ok(InitialData::new(
                    g,
                    Arc::new(move |x| {
                        let s = xi(x);
                        a * (four * s * (T::one() - s)).powi(p)
                    }),
                    Arc::new(|_| T::zero()),
                    Some(Arc::new(move |x| {
                        let s = xi(x);
                        a * T::lit(p as f64)
                            * (four * s * (T::one() - s)).powi(p - 1)
                            * four
                            * (T::one() - T::lit(2.0) * s)
                            / len
                    })),
                )?)
            }
            Preset::CompactBump { amplitude, center, width } => {
                if !(width > 0.0 && center - width / 2.0 >= 0.0 && center + width / 2.0 <= 1.0) {
                    return Err(WaveError::InvalidArgument(
                        "compact bump support must lie inside the initial interval".into(),
                    ));
                }
                let a = T::lit(amplitude);
                let c = T::lit(center);
                let hw = T::lit(width / 2.0);
                let r = move |x: T| ((x + shift) / len - c) / hw;
                let bump = move |r: T| {
                    if r.abs() >= T::one() {
                        T::zero()
                    } else {
                        (-T::one() / (T::one() - r * r)).exp()
                    }
                };
                Ok(InitialData::new(
                    g,
                    Arc::new(move |x| a * bump(r(x))),
                    Arc::new(|_| T::zero()),
                    Some(Arc::new(move |x| {
                        let rr = r(x);
                        if rr.abs() >= T::one() {
                            return T::zero();
                        }
                        let d = T::one() - rr * rr;
                        a * bump(rr) * (-T::lit(2.0) * rr / (d * d)) / (hw * len)
                    })),
                )?)
            }
            Preset::RandomModes { modes, seed, amplitude } => {
                let c = random_mode_coefficients(g, modes, seed, amplitude)?;
                Ok(data_from_series(&c))
            }
        }
    }
}

/// Coefficients with `c_n`, `1 <= n <= modes`, uniform in the disc of radius
/// `amplitude / n^2`, and `c_-n = conj(c_n)`.
pub fn random_mode_coefficients<T: Real>(
    g: &DomainGeometry<T>,
    modes: usize,
    seed: u64,
    amplitude: f64,
) -> Result<SpectralCoefficients<T>> {
    if modes == 0 {
        return Err(WaveError::InvalidArgument("random_modes needs at least one mode".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = SpectralCoefficients::zeros(g, modes);
    for n in 1..=modes as i64 {
        let r = amplitude * rng.gen::<f64>().sqrt() / (n * n) as f64;
        let th = rng.gen::<f64>() * std::f64::consts::TAU;
        let z = Complex::new(T::lit(r * th.cos()), T::lit(r * th.sin()));
        c.set(n, z)?;
        c.set(-n, z.conj())?;
    }
    Ok(c)
}

/// Initial data read off the series at `t = t0`.
pub fn data_from_series<T: Real>(c: &SpectralCoefficients<T>) -> InitialData<T> {
    let g = *c.geometry();
    let t0 = g.t0;
    let (a, b) = g.initial_interval();
    let clamp = move |x: T| x.max(a).min(b);
    let (c0, c1, c2) = (c.clone(), c.clone(), c.clone());
    InitialData::new(
        &g,
        Arc::new(move |x| c0.evaluate(clamp(x), t0).map(|s| s.phi).unwrap_or_else(|_| T::nan())),
        Arc::new(move |x| c1.evaluate(clamp(x), t0).map(|s| s.phi_t).unwrap_or_else(|_| T::nan())),
        Some(Arc::new(move |x| c2.evaluate(clamp(x), t0).map(|s| s.phi_x).unwrap_or_else(|_| T::nan()))),
    )
    .expect("series data satisfy the boundary conditions")
}
