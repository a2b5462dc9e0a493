//! Generalized Fourier coefficients and the series solution
//! `phi = sum c_n (z_+^n - e^{i n pi kappa log rho2} z_-^n)`, with
//! `z_pm = exp(i pi kappa log(t +- x))`.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};
use crate::extension::ExtendedData;
use crate::geometry::{DomainGeometry, Side};
use crate::quadrature::{self, GaussLegendre};
use crate::scalar::Real;

/// Truncated coefficient sequence `{c_n : 1 <= |n| <= N}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoefficients<T> {
    geometry: DomainGeometry<T>,
    pos: Vec<Complex<T>>,
    neg: Vec<Complex<T>>,
}

/// Values of the solution and its first derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldSample<T> {
    pub x: T,
    pub t: T,
    pub phi: T,
    pub phi_x: T,
    pub phi_t: T,
}

/// Where a [`WaveField`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Series,
    Oracle,
}

/// Sampled solution values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveField<T> {
    pub provenance: Provenance,
    pub samples: Vec<FieldSample<T>>,
}

impl<T: Real> WaveField<T> {
    /// Largest pointwise difference in `phi` between two fields on the same points.
    pub fn max_abs_difference(&self, other: &Self) -> T {
        self.samples.iter().zip(&other.samples).map(|(a, b)| (a.phi - b.phi).abs()).fold(T::zero(), T::max)
    }
}

/// Serialized form `{"N": .., "c": [{"n": .., "re": .., "im": ..}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsJson {
    #[serde(rename = "N")]
    pub n_max: usize,
    pub c: Vec<CoefficientEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientEntry {
    pub n: i64,
    pub re: f64,
    pub im: f64,
}

/// `exp(i pi kappa log z)` raised to the powers `1..=n`.
fn phase_powers<T: Real>(kappa: T, z: T, n: usize) -> Vec<Complex<T>> {
    let base = Complex::from_polar(T::one(), T::PI() * kappa * z.ln());
    let mut out = Vec::with_capacity(n);
    let mut acc = Complex::new(T::one(), T::zero());
    for _ in 0..n {
        acc = acc * base;
        out.push(acc);
    }
    out
}

/// `exp(i n pi kappa log z)` for a single `n`, computed directly.
fn phase<T: Real>(kappa: T, z: T, n: i64) -> Complex<T> {
    let nn = T::from_i64(n).expect("mode index");
    Complex::from_polar(T::one(), nn * T::PI() * kappa * z.ln())
}

impl<T: Real> SpectralCoefficients<T> {
    pub fn zeros(g: &DomainGeometry<T>, n_max: usize) -> Self {
        let z = Complex::new(T::zero(), T::zero());
        Self { geometry: *g, pos: vec![z; n_max], neg: vec![z; n_max] }
    }

    /// Builds coefficients from `f(n)` for `1 <= |n| <= n_max`.
    pub fn from_fn<F: Fn(i64) -> Complex<T>>(g: &DomainGeometry<T>, n_max: usize, f: F) -> Self {
        let mut c = Self::zeros(g, n_max);
        for k in 1..=n_max as i64 {
            c.pos[k as usize - 1] = f(k);
            c.neg[k as usize - 1] = f(-k);
        }
        c
    }

    pub fn geometry(&self) -> &DomainGeometry<T> {
        &self.geometry
    }

    pub fn n_max(&self) -> usize {
        self.pos.len()
    }

    /// `c_n`; zero for `n = 0` and for `|n| > N`.
    pub fn get(&self, n: i64) -> Complex<T> {
        let k = n.unsigned_abs() as usize;
        if n == 0 || k > self.n_max() {
            return Complex::new(T::zero(), T::zero());
        }
        if n > 0 {
            self.pos[k - 1]
        } else {
            self.neg[k - 1]
        }
    }

    pub fn set(&mut self, n: i64, value: Complex<T>) -> Result<()> {
        let k = n.unsigned_abs() as usize;
        if n == 0 || k > self.n_max() {
            return Err(WaveError::InvalidArgument(format!("mode {n} outside 1..={}", self.n_max())));
        }
        if n > 0 {
            self.pos[k - 1] = value;
        } else {
            self.neg[k - 1] = value;
        }
        Ok(())
    }

    /// `C_n = c_n exp(i n pi kappa log((1+ell2)/(1-ell2)))`.
    pub fn big_c(&self, n: i64) -> Complex<T> {
        self.get(n) * phase(self.geometry.kappa, self.geometry.reflection_factor(Side::Right), n)
    }

    /// Modes in the order `-N..-1, 1..N`.
    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex<T>)> + '_ {
        let n = self.n_max() as i64;
        (-n..=n).filter(|&k| k != 0).map(move |k| (k, self.get(k)))
    }

    pub fn max_abs(&self) -> T {
        self.iter().map(|(_, c)| c.norm()).fold(T::zero(), T::max)
    }

    /// `sum |n c_n|^2`.
    pub fn weighted_sum(&self) -> T {
        self.iter()
            .map(|(n, c)| {
                let nn = T::from_i64(n).expect("mode index");
                (c * nn).norm_sqr()
            })
            .sum()
    }

    /// The conserved quantity `S = 2 pi^2 kappa sum |n c_n|^2`.
    pub fn s_invariant(&self) -> T {
        T::lit(2.0) * T::PI() * T::PI() * self.geometry.kappa * self.weighted_sum()
    }

    /// `max(|c_N|, |c_-N|)^2 N^2 / sum |n c_n|^2`; zero for zero data.
    pub fn tail_indicator(&self) -> T {
        let n = self.n_max();
        if n == 0 {
            return T::zero();
        }
        let s = self.weighted_sum();
        if s == T::zero() {
            return T::zero();
        }
        let last = self.pos[n - 1].norm().max(self.neg[n - 1].norm());
        last * last * T::of(n * n) / s
    }

    /// `max |c_{-n} - conj(c_n)|`.
    pub fn reality_defect(&self) -> T {
        (1..=self.n_max() as i64).map(|n| (self.get(-n) - self.get(n).conj()).norm()).fold(T::zero(), T::max)
    }

    /// Largest `|c_n - d_n|` over the common modes.
    pub fn max_difference(&self, other: &Self) -> T {
        let n = self.n_max().max(other.n_max()) as i64;
        (-n..=n).filter(|&k| k != 0).map(|k| (self.get(k) - other.get(k)).norm()).fold(T::zero(), T::max)
    }

    /// Scales every coefficient.
    pub fn scaled(&self, s: T) -> Self {
        Self {
            geometry: self.geometry,
            pos: self.pos.iter().map(|c| c * s).collect(),
            neg: self.neg.iter().map(|c| c * s).collect(),
        }
    }

    fn check_point(&self, x: T, t: T) -> Result<()> {
        let g = &self.geometry;
        let tol = T::lit(16.0) * T::epsilon();
        if !x.is_finite() || !t.is_finite() || !g.contains(x, t, tol) {
            if t < g.t0 {
                return Err(WaveError::BeforeInitialTime { t: t.to_f64_lossy(), t0: g.t0.to_f64_lossy() });
            }
            return Err(WaveError::OutsideDomain { x: x.to_f64_lossy(), t: t.to_f64_lossy() });
        }
        Ok(())
    }

    /// Complex partial sums for `phi`, `phi_x`, `phi_t`.
    fn sums(&self, x: T, t: T) -> [Complex<T>; 3] {
        let g = &self.geometry;
        let n = self.n_max();
        let (wp, wm) = (t + x, t - x);
        let zp = phase_powers(g.kappa, wp, n);
        let zm = phase_powers(g.kappa, wm, n);
        let rho = phase_powers(g.kappa, g.reflection_factor(Side::Right), n);
        let zero = Complex::new(T::zero(), T::zero());
        let (mut s0, mut sp, mut sm) = (zero, zero, zero);
        for k in 0..n {
            let nn = T::of(k + 1);
            // n > 0
            let c = self.pos[k];
            let cc = c * rho[k];
            let a = c * zp[k];
            let b = cc * zm[k];
            s0 = s0 + a - b;
            sp = sp + a * nn;
            sm = sm + b * nn;
            // n < 0: conjugated phases, negative index
            let c = self.neg[k];
            let cc = c * rho[k].conj();
            let a = c * zp[k].conj();
            let b = cc * zm[k].conj();
            s0 = s0 + a - b;
            sp = sp - a * nn;
            sm = sm - b * nn;
        }
        let ipk = Complex::new(T::zero(), T::PI() * g.kappa);
        let px = ipk * (sp / wp + sm / wm);
        let pt = ipk * (sp / wp - sm / wm);
        [s0, px, pt]
    }

    /// Truncated series and its first derivatives at `(x, t)` in the closed domain.
    pub fn evaluate(&self, x: T, t: T) -> Result<FieldSample<T>> {
        self.check_point(x, t)?;
        let [p, px, pt] = self.sums(x, t);
        Ok(FieldSample { x, t, phi: p.re, phi_x: px.re, phi_t: pt.re })
    }

    /// Like [`Self::evaluate`], also returning the largest discarded imaginary part.
    pub fn evaluate_with_residue(&self, x: T, t: T) -> Result<(FieldSample<T>, T)> {
        self.check_point(x, t)?;
        let [p, px, pt] = self.sums(x, t);
        let im = p.im.abs().max(px.im.abs()).max(pt.im.abs());
        Ok((FieldSample { x, t, phi: p.re, phi_x: px.re, phi_t: pt.re }, im))
    }

    /// Evaluates on many points in parallel.
    pub fn evaluate_field(&self, pts: &[(T, T)]) -> Result<WaveField<T>> {
        let samples = pts.par_iter().map(|&(x, t)| self.evaluate(x, t)).collect::<Result<Vec<_>>>()?;
        Ok(WaveField { provenance: Provenance::Series, samples })
    }

    /// `phi_x` at the moving endpoint by the closed-form single sum.
    pub fn boundary_trace(&self, side: Side, t: T) -> T {
        let g = &self.geometry;
        let one = T::one();
        let (e, shift) = match side {
            Side::Right => (g.ell2, one + g.ell2),
            Side::Left => (g.ell1, one - g.ell1),
        };
        let n = self.n_max();
        let z = phase_powers(g.kappa, shift * t, n);
        let mut s = Complex::new(T::zero(), T::zero());
        for k in 0..n {
            let nn = T::of(k + 1);
            s = s + self.pos[k] * z[k] * nn - self.neg[k] * z[k].conj() * nn;
        }
        let i = Complex::new(T::zero(), one);
        let pref = T::lit(2.0) * T::PI() * g.kappa / ((one - e * e) * t);
        (i * s).re * pref
    }

    /// Time derivative of [`boundary_trace`](Self::boundary_trace).
    pub fn boundary_trace_derivative(&self, side: Side, t: T) -> T {
        let g = &self.geometry;
        let one = T::one();
        let (e, shift) = match side {
            Side::Right => (g.ell2, one + g.ell2),
            Side::Left => (g.ell1, one - g.ell1),
        };
        let n = self.n_max();
        let z = phase_powers(g.kappa, shift * t, n);
        let mut s2 = Complex::new(T::zero(), T::zero());
        for k in 0..n {
            let nn = T::of((k + 1) * (k + 1));
            s2 = s2 + (self.pos[k] * z[k] + self.neg[k] * z[k].conj()) * nn;
        }
        let pref = T::lit(2.0) * T::PI() * g.kappa / ((one - e * e) * t);
        -self.boundary_trace(side, t) / t - pref * T::PI() * g.kappa * s2.re / t
    }

    pub fn to_json(&self) -> CoefficientsJson {
        CoefficientsJson {
            n_max: self.n_max(),
            c: self
                .iter()
                .map(|(n, c)| CoefficientEntry { n, re: c.re.to_f64_lossy(), im: c.im.to_f64_lossy() })
                .collect(),
        }
    }

    pub fn from_json(g: &DomainGeometry<T>, j: &CoefficientsJson) -> Result<Self> {
        let mut c = Self::zeros(g, j.n_max);
        for e in &j.c {
            if !e.re.is_finite() || !e.im.is_finite() {
                return Err(WaveError::NonFinite(format!("coefficient {}", e.n)));
            }
            c.set(e.n, Complex::new(T::lit(e.re), T::lit(e.im)))?;
        }
        Ok(c)
    }
}

/// Quadrature used for the coefficient integrals in the log variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum CoefficientRule {
    /// Composite Gauss–Legendre with panel edges at the pivot image.
    PanelGauss { panels: usize, order: usize },
    /// Uniform trapezoid with `2^log2_panels` panels; spectrally accurate only
    /// when the transformed integrand is smooth and periodic.
    Trapezoid { log2_panels: u32 },
}

impl Default for CoefficientRule {
    fn default() -> Self {
        CoefficientRule::PanelGauss { panels: 256, order: 16 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoefficientOptions {
    pub rule: CoefficientRule,
    /// Allowed `max|c+ - c-|`, relative to `max|c|`.
    pub cross_tolerance: f64,
}

impl Default for CoefficientOptions {
    fn default() -> Self {
        Self { rule: CoefficientRule::default(), cross_tolerance: 1e-6 }
    }
}

/// Coefficients from the plus formula together with the minus-formula copy.
#[derive(Debug, Clone)]
pub struct CoefficientReport<T> {
    pub coefficients: SpectralCoefficients<T>,
    pub minus_coefficients: SpectralCoefficients<T>,
    pub cross_residual: T,
    pub tail_indicator: T,
}

/// Nodes and weights on [0, 2] for the chosen rule, with a panel edge at `pivot`.
fn log_nodes<T: Real>(rule: CoefficientRule, pivot: T) -> Vec<(T, T)> {
    let two = T::lit(2.0);
    match rule {
        CoefficientRule::PanelGauss { panels, order } => {
            let gl = GaussLegendre::cached(order.max(1));
            let mut out = Vec::new();
            for (lo, hi) in [(T::zero(), pivot), (pivot, two)] {
                if hi <= lo {
                    continue;
                }
                let share = ((hi - lo) / two).to_f64_lossy();
                let np = ((panels as f64 * share).ceil() as usize).max(1);
                let h = (hi - lo) / T::of(np);
                for p in 0..np {
                    let half = h / two;
                    let mid = lo + h * T::of(p) + half;
                    for (x, w) in gl.nodes.iter().zip(&gl.weights) {
                        out.push((mid + half * T::lit(*x), half * T::lit(*w)));
                    }
                }
            }
            out
        }
        CoefficientRule::Trapezoid { log2_panels } => {
            let m = 1usize << log2_panels;
            let h = two / T::of(m);
            (0..m).map(|j| (h * T::of(j), h)).collect()
        }
    }
}

/// Fourier integrals `int_0^2 h(s) e^{-i n pi s} ds` for `n = 1..=N` and `-1..=-N`.
fn fourier_integrals<T: Real>(nodes: &[(T, T)], values: &[T], n_max: usize) -> (Vec<Complex<T>>, Vec<Complex<T>>) {
    let zero = Complex::new(T::zero(), T::zero());
    let parts: Vec<Vec<Complex<T>>> = nodes
        .par_chunks(256)
        .zip(values.par_chunks(256))
        .map(|(nc, vc)| {
            let mut acc = vec![zero; n_max];
            for (&(s, w), &v) in nc.iter().zip(vc) {
                let base = Complex::from_polar(T::one(), -T::PI() * s);
                let mut z = Complex::new(w * v, T::zero());
                for a in acc.iter_mut() {
                    z = z * base;
                    *a = *a + z;
                }
            }
            acc
        })
        .collect();
    let mut pos = vec![zero; n_max];
    for p in parts {
        for (a, b) in pos.iter_mut().zip(p) {
            *a = *a + b;
        }
    }
    // Real integrand: the negative modes are conjugates.
    let neg = pos.iter().map(|c| c.conj()).collect();
    (pos, neg)
}

/// Computes `c_n`, `1 <= |n| <= N`, from both coefficient formulas.
pub fn compute_coefficients<T: Real>(
    e: &ExtendedData<T>,
    n_max: usize,
    opts: &CoefficientOptions,
) -> Result<CoefficientReport<T>> {
    if n_max == 0 {
        return Err(WaveError::InvalidArgument("truncation order N must be at least 1".into()));
    }
    let g = *e.geometry();
    let one = T::one();
    let (t0, kappa) = (g.t0, g.kappa);
    let four_pi_i = Complex::new(T::zero(), T::lit(4.0) * T::PI());

    // Plus side: s = kappa log((t0+x)/(t0(1-ell1))), x in (-ell1 t0, L2 t0).
    let base_p = t0 * (one - g.ell1);
    let nodes_p = log_nodes(opts.rule, kappa * g.beta.ln());
    let vals_p = nodes_p
        .iter()
        .map(|&(s, _)| {
            let w = base_p * (s / kappa).exp();
            let x = w - t0;
            let f = e.ext_phi0_x(x)? + e.ext_phi1(x)?;
            Ok(f * w / kappa)
        })
        .collect::<Result<Vec<T>>>()?;
    // Minus side: sigma = kappa log((t0-x)/(t0(1-ell2))), x in (-L1 t0, ell2 t0).
    let base_m = t0 * (one - g.ell2);
    let nodes_m = log_nodes(opts.rule, kappa * g.alpha.ln());
    let vals_m = nodes_m
        .iter()
        .map(|&(s, _)| {
            let w = base_m * (s / kappa).exp();
            let x = t0 - w;
            let f = e.ext_phi0_x(x)? - e.ext_phi1(x)?;
            Ok(f * w / kappa)
        })
        .collect::<Result<Vec<T>>>()?;
    if vals_p.iter().chain(&vals_m).any(|v| !v.is_finite()) {
        return Err(WaveError::NonFinite("extended data".into()));
    }

    let (ip, inn) = fourier_integrals(&nodes_p, &vals_p, n_max);
    let (mp, mn) = fourier_integrals(&nodes_m, &vals_m, n_max);
    let rho1 = g.reflection_factor(Side::Left);
    let plus = SpectralCoefficients::from_fn(&g, n_max, |n| {
        let k = n.unsigned_abs() as usize - 1;
        let integral = if n > 0 { ip[k] } else { inn[k] };
        let nn = T::from_i64(n).expect("mode index");
        integral * phase(kappa, base_p, -n) / (four_pi_i * nn)
    });
    let minus = SpectralCoefficients::from_fn(&g, n_max, |n| {
        let k = n.unsigned_abs() as usize - 1;
        let integral = if n > 0 { mp[k] } else { mn[k] };
        let nn = T::from_i64(n).expect("mode index");
        integral * phase(kappa, base_m, -n) * phase(kappa, rho1, n) / (four_pi_i * nn)
    });

    let cross = plus.max_difference(&minus);
    let scale = plus.max_abs();
    if cross > T::lit(opts.cross_tolerance) * scale.max(T::min_positive_value()) && cross > T::zero() {
        return Err(WaveError::CrossFormula {
            residual: cross.to_f64_lossy(),
            tolerance: opts.cross_tolerance * scale.to_f64_lossy(),
        });
    }
    let tail = plus.tail_indicator();
    Ok(CoefficientReport { coefficients: plus, minus_coefficients: minus, cross_residual: cross, tail_indicator: tail })
}

/// Coefficient sum against both weighted integrals of the extended data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParsevalReport<T> {
    /// `sum |n c_n|^2` over the stored modes.
    pub coefficient_sum: T,
    /// `(8 pi^2 kappa)^-1 int |phi0_x + phi1|^2 (t0 + x) dx` over `(-ell1 t0, L2 t0)`.
    pub plus_integral: T,
    /// `(8 pi^2 kappa)^-1 int |phi0_x - phi1|^2 (t0 - x) dx` over `(-L1 t0, ell2 t0)`.
    pub minus_integral: T,
}

pub fn parseval_sum<T: Real>(c: &SpectralCoefficients<T>, e: &ExtendedData<T>, quad_n: usize) -> ParsevalReport<T> {
    let g = e.geometry();
    let t0 = g.t0;
    let pref = T::one() / (T::lit(8.0) * T::PI() * T::PI() * g.kappa);
    let (a, b) = g.initial_interval();
    let (pa, pb) = g.plus_interval();
    let (ma, mb) = g.minus_interval();
    let fp = |x: T| {
        let f = e.ext_phi0_x(x).unwrap_or_else(|_| T::zero()) + e.ext_phi1(x).unwrap_or_else(|_| T::zero());
        f * f * (t0 + x)
    };
    let fm = |x: T| {
        let f = e.ext_phi0_x(x).unwrap_or_else(|_| T::zero()) - e.ext_phi1(x).unwrap_or_else(|_| T::zero());
        f * f * (t0 - x)
    };
    ParsevalReport {
        coefficient_sum: c.weighted_sum(),
        plus_integral: pref * quadrature::integrate(fp, pa, pb, quad_n, &[b]),
        minus_integral: pref * quadrature::integrate(fm, ma, mb, quad_n, &[a]),
    }
}

/// Gram matrix of `sqrt(kappa/(2M)) exp(i pi n (kappa/M) log z)`, `n` in
/// `-half..=half`, under `int . dz/z` on `(a, (alpha beta)^M a)`, by quadrature in `z`.
pub fn basis_gram<T: Real>(g: &DomainGeometry<T>, a: T, m: usize, half: usize, quad_n: usize) -> Vec<Vec<Complex<T>>> {
    let mm = T::of(m);
    let b = a * g.alpha_beta().powi(m as i32);
    let nodes = quadrature::composite_nodes(a, b, quad_n, &[]);
    let k = g.kappa / mm;
    let norm = g.kappa / (T::lit(2.0) * mm);
    let modes: Vec<i64> = (-(half as i64)..=half as i64).collect();
    let vals: Vec<Vec<Complex<T>>> = nodes
        .iter()
        .map(|&(z, _)| {
            modes
                .iter()
                .map(|&n| Complex::from_polar(T::one(), T::from_i64(n).expect("mode") * T::PI() * k * z.ln()))
                .collect()
        })
        .collect();
    modes
        .iter()
        .enumerate()
        .map(|(i, _)| {
            modes
                .iter()
                .enumerate()
                .map(|(j, _)| {
                    let mut s = Complex::new(T::zero(), T::zero());
                    for ((z, w), v) in nodes.iter().zip(&vals) {
                        s = s + v[i] * v[j].conj() * (*w * norm / *z);
                    }
                    s
                })
                .collect()
        })
        .collect()
}
