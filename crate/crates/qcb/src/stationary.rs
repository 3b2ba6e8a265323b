//! Driven cavity with a moving mirror: classical steady state, linearized
//! quantum fluctuations, stability and the stationary covariance matrix.
//!
//! Rates are angular frequencies (rad/s). Fluctuation quadratures are ordered
//! (δq, δp, δX, δY): mirror first, so mode 1 of the covariance is the mirror.
//! Linear solves run in units of ω_m.

use nalgebra::{DMatrix, DVector, Matrix4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gaussian::logneg_gaussian;
use crate::{Error, RMat, Result};

pub const HBAR: f64 = 1.054_571_817e-34;
pub const C_LIGHT: f64 = 299_792_458.0;
pub const K_B: f64 = 1.380_649e-23;

/// Mapping from finesse to the cavity decay rate κ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum KappaConvention {
    /// κ = πc/(L𝓕): the full linewidth Δω/𝓕 with Δω = πc/L.
    #[default]
    FullWidth,
    /// κ = πc/(2L𝓕): half of it.
    HalfWidth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryParams {
    pub omega_m: f64,
    pub gamma_m: f64,
    pub kappa: f64,
    /// Bare cavity-laser detuning Δ₀.
    pub delta0: f64,
    /// Single-photon radiation-pressure coupling.
    pub g: f64,
    /// Drive amplitude |E| = √(2Pκ/ħω₀).
    pub drive_e: f64,
    pub n_bar: f64,
}

impl StationaryParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("omega_m", self.omega_m), ("gamma_m", self.gamma_m), ("kappa", self.kappa)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("{name} = {v} must be positive")));
            }
        }
        for (name, v) in [("g", self.g), ("drive_e", self.drive_e), ("n_bar", self.n_bar)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("{name} = {v} must be non-negative")));
            }
        }
        if !self.delta0.is_finite() {
            return Err(Error::Domain("delta0 not finite".into()));
        }
        Ok(())
    }
}

/// Laboratory inputs in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalInputs {
    /// Cavity length (m).
    pub length: f64,
    /// Effective mirror mass (kg).
    pub mass: f64,
    /// Laser wavelength (m); ω_c = 2πc/λ.
    pub wavelength: f64,
    /// Input power (W).
    pub power: f64,
    pub finesse: f64,
    /// Mechanical quality factor; γ_m = ω_m/Q.
    pub q_factor: f64,
    /// Bath temperature (K).
    pub temperature: f64,
    /// Mechanical angular frequency (rad/s).
    pub omega_m: f64,
    pub convention: KappaConvention,
    /// Overrides the finesse-derived κ when set.
    pub kappa_override: Option<f64>,
}

impl PhysicalInputs {
    /// 1 mm cavity, 𝓕 = 1.07e4, 810 nm, 50 mW, Q = 1e5, 10 MHz, 5 ng, 0.4 K.
    pub fn reference() -> Self {
        Self {
            length: 1e-3,
            mass: 5e-12,
            wavelength: 810e-9,
            power: 50e-3,
            finesse: 1.07e4,
            q_factor: 1e5,
            temperature: 0.4,
            omega_m: 2.0 * std::f64::consts::PI * 1e7,
            convention: KappaConvention::FullWidth,
            kappa_override: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivedParams {
    pub params: StationaryParams,
    pub omega_c: f64,
    /// ω_m/(πc/L); the single-mode treatment needs this ≪ 1.
    pub adiabatic_ratio: f64,
    pub warning: Option<String>,
}

pub fn thermal_occupancy(omega: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    1.0 / (HBAR * omega / (K_B * temperature)).exp_m1()
}

/// SI inputs → model parameters at zero bare detuning.
pub fn derive_physical_params(inp: &PhysicalInputs) -> Result<DerivedParams> {
    for (name, v) in [
        ("length", inp.length),
        ("mass", inp.mass),
        ("wavelength", inp.wavelength),
        ("power", inp.power),
        ("finesse", inp.finesse),
        ("q_factor", inp.q_factor),
        ("omega_m", inp.omega_m),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Domain(format!("{name} = {v} must be positive")));
        }
    }
    if !(inp.temperature >= 0.0) {
        return Err(Error::Domain(format!("temperature = {}", inp.temperature)));
    }
    let fsr = std::f64::consts::PI * C_LIGHT / inp.length;
    let kappa = match (inp.kappa_override, inp.convention) {
        (Some(k), _) if k > 0.0 => k,
        (Some(k), _) => return Err(Error::Domain(format!("kappa override {k}"))),
        (None, KappaConvention::FullWidth) => fsr / inp.finesse,
        (None, KappaConvention::HalfWidth) => fsr / (2.0 * inp.finesse),
    };
    let omega_c = 2.0 * std::f64::consts::PI * C_LIGHT / inp.wavelength;
    let g = omega_c / inp.length * (HBAR / (inp.mass * inp.omega_m)).sqrt();
    let drive_e = (2.0 * inp.power * kappa / (HBAR * omega_c)).sqrt();
    let ratio = inp.omega_m / fsr;
    let warning = (ratio > 0.01).then(|| format!("ω_m/(πc/L) = {ratio:.3e} > 0.01: single-mode adiabatic picture is questionable"));
    let params = StationaryParams {
        omega_m: inp.omega_m,
        gamma_m: inp.omega_m / inp.q_factor,
        kappa,
        delta0: 0.0,
        g,
        drive_e,
        n_bar: thermal_occupancy(inp.omega_m, inp.temperature),
    };
    Ok(DerivedParams { params, omega_c, adiabatic_ratio: ratio, warning })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyState {
    /// Intracavity amplitude, phase fixed real and non-negative.
    pub alpha_s: f64,
    pub q_s: f64,
    pub p_s: f64,
    /// Effective detuning Δ = Δ₀ - g q_s.
    pub delta: f64,
    /// G = √2 g α_s.
    pub big_g: f64,
}

fn make_state(p: &StationaryParams, u: f64) -> SteadyState {
    let alpha_s = u.sqrt();
    let q_s = p.g / p.omega_m * u;
    SteadyState { alpha_s, q_s, p_s: 0.0, delta: p.delta0 - p.g * q_s, big_g: std::f64::consts::SQRT_2 * p.g * alpha_s }
}

/// Real roots of x³ + a x² + b x + c.
fn real_cubic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let q = (a * a - 3.0 * b) / 9.0;
    let r = (2.0 * a * a * a - 9.0 * a * b + 27.0 * c) / 54.0;
    let mut roots = if r * r < q * q * q {
        let th = (r / (q * q * q).sqrt()).clamp(-1.0, 1.0).acos();
        let s = -2.0 * q.sqrt();
        let tau = 2.0 * std::f64::consts::PI;
        vec![s * (th / 3.0).cos() - a / 3.0, s * ((th + tau) / 3.0).cos() - a / 3.0, s * ((th - tau) / 3.0).cos() - a / 3.0]
    } else {
        let big_a = -r.signum() * (r.abs() + (r * r - q * q * q).sqrt()).cbrt();
        let big_b = if big_a != 0.0 { q / big_a } else { 0.0 };
        vec![big_a + big_b - a / 3.0]
    };
    roots.sort_by(f64::total_cmp);
    roots
}

/// All positive solutions u = α_s² of u[κ² + (Δ₀ - g²u/ω_m)²] = E², ascending.
pub fn steady_state(p: &StationaryParams) -> Result<Vec<SteadyState>> {
    p.validate()?;
    if p.drive_e == 0.0 {
        return Ok(vec![make_state(p, 0.0)]);
    }
    // ω_m-normalized: κ̂, Δ̂, ĉ = g²/ω_m², Ê² = E²/ω_m²
    let w = p.omega_m;
    let (k, d0, c, e2) = (p.kappa / w, p.delta0 / w, (p.g / w).powi(2), (p.drive_e / w).powi(2));
    let f = |u: f64| u * (k * k + (d0 - c * u).powi(2)) - e2;
    let df = |u: f64| k * k + (d0 - c * u).powi(2) - 2.0 * c * u * (d0 - c * u);
    let mut us = if c == 0.0 {
        vec![e2 / (k * k + d0 * d0)]
    } else {
        real_cubic_roots(-2.0 * d0 / c, (k * k + d0 * d0) / (c * c), -e2 / (c * c))
    };
    for u in us.iter_mut() {
        // polish
        for _ in 0..3 {
            let d = df(*u);
            if d != 0.0 {
                let step = f(*u) / d;
                if step.is_finite() {
                    *u -= step;
                }
            }
        }
    }
    us.retain(|&u| u > 0.0 && f(u).abs() <= 1e-9 * e2.max(1.0));
    us.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    if us.is_empty() {
        return Err(Error::NoRoot);
    }
    Ok(us.into_iter().map(|u| make_state(p, u)).collect())
}

/// Steady state parameterized by the effective detuning: u = E²/(κ² + Δ²),
/// with Δ₀ = Δ + g²u/ω_m reconstructed.
pub fn steady_state_at_effective_detuning(p: &StationaryParams, delta: f64) -> Result<(StationaryParams, SteadyState)> {
    p.validate()?;
    let u = p.drive_e.powi(2) / (p.kappa.powi(2) + delta * delta);
    let q = StationaryParams { delta0: delta + p.g * p.g * u / p.omega_m, ..*p };
    let s = make_state(&q, u);
    Ok((q, s))
}

/// Drift A in the (δq, δp, δX, δY) basis and diffusion D.
pub fn drift_and_diffusion(p: &StationaryParams, s: &SteadyState) -> (Matrix4<f64>, Matrix4<f64>) {
    let (wm, gm, k, d, g) = (p.omega_m, p.gamma_m, p.kappa, s.delta, s.big_g);
    #[rustfmt::skip]
    let a = Matrix4::new(
        0.0, wm,  0.0, 0.0,
        -wm, -gm, g,   0.0,
        0.0, 0.0, -k,  d,
        g,   0.0, -d,  -k,
    );
    let dd = Matrix4::from_diagonal(&nalgebra::Vector4::new(0.0, gm * (2.0 * p.n_bar + 1.0), k, k));
    (a, dd)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stability {
    pub s1: f64,
    pub s2: f64,
    pub stable: bool,
}

/// Routh-Hurwitz conditions S1 > 0 and S2 > 0.
pub fn stability_check(p: &StationaryParams, s: &SteadyState) -> Stability {
    let (wm, gm, k, d, g) = (p.omega_m, p.gamma_m, p.kappa, s.delta, s.big_g);
    let g2 = g * g;
    let s1 = 2.0 * gm * k * (d.powi(4) + d * d * (gm * gm + 2.0 * gm * k + 2.0 * k * k - 2.0 * wm * wm) + (gm * k + k * k + wm * wm).powi(2))
        + wm * g2 * d * (gm + 2.0 * k).powi(2);
    let s2 = wm * wm * (d * d + k * k) - wm * g2 * d;
    Stability { s1, s2, stable: s1 > 0.0 && s2 > 0.0 }
}

/// Largest real part of the spectrum.
pub fn spectral_abscissa(a: &RMat) -> f64 {
    a.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Solves A V + V Aᵀ = -D for symmetric V over the n(n+1)/2 independent entries.
pub fn lyapunov_solve(a: &RMat, d: &RMat) -> Result<RMat> {
    let n = a.nrows();
    if !a.is_square() || d.shape() != (n, n) {
        return Err(Error::Dimension(format!("A {:?}, D {:?}", a.shape(), d.shape())));
    }
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let an = a / scale;
    let dn = d / scale;
    if spectral_abscissa(&an) >= 0.0 {
        return Err(Error::Unstable);
    }
    let idx = |i: usize, j: usize| {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * n - i * (i + 1) / 2 + j
    };
    let m = n * (n + 1) / 2;
    let mut lhs = DMatrix::<f64>::zeros(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    for i in 0..n {
        for j in i..n {
            let row = idx(i, j);
            for k in 0..n {
                lhs[(row, idx(k, j))] += an[(i, k)];
                lhs[(row, idx(i, k))] += an[(j, k)];
            }
            rhs[row] = -0.5 * (dn[(i, j)] + dn[(j, i)]);
        }
    }
    let sol = lhs.lu().solve(&rhs).ok_or(Error::Singular)?;
    if sol.iter().any(|x| !x.is_finite()) {
        return Err(Error::Singular);
    }
    Ok(RMat::from_fn(n, n, |i, j| sol[idx(i, j)]))
}

/// max |A V + V Aᵀ + D| / max |D|.
pub fn lyapunov_residual(a: &RMat, v: &RMat, d: &RMat) -> f64 {
    let r = a * v + v * a.transpose() + d;
    r.amax() / d.amax().max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryPoint {
    pub params: StationaryParams,
    pub steady: SteadyState,
    pub stability: Stability,
    /// Covariance of (δq, δp, δX, δY); absent when unstable.
    pub cov: Option<Matrix4<f64>>,
    pub log_neg: Option<f64>,
    pub n_eff: Option<f64>,
}

fn analyse(p: StationaryParams, s: SteadyState) -> Result<StationaryPoint> {
    let stability = stability_check(&p, &s);
    let (a, d) = drift_and_diffusion(&p, &s);
    let (cov, log_neg, n_eff) = if stability.stable {
        let v = lyapunov_solve(&RMat::from_iterator(4, 4, a.iter().copied()), &RMat::from_iterator(4, 4, d.iter().copied()))?;
        let v4 = Matrix4::from_fn(|i, j| 0.5 * (v[(i, j)] + v[(j, i)]));
        let en = logneg_gaussian(&v4)?;
        (Some(v4), Some(en), Some(0.5 * (v4[(0, 0)] + v4[(1, 1)]) - 0.5))
    } else {
        (None, None, None)
    };
    Ok(StationaryPoint { params: p, steady: s, stability, cov, log_neg, n_eff })
}

/// Stationary entanglement and effective mirror occupancy on the lowest
/// (low-power-connected) branch of the bare-detuning problem.
pub fn steady_entanglement(p: &StationaryParams) -> Result<StationaryPoint> {
    let s = steady_state(p)?[0];
    let pt = analyse(*p, s)?;
    if !pt.stability.stable {
        return Err(Error::Unstable);
    }
    Ok(pt)
}

/// Same analysis at a prescribed effective detuning; unstable points are
/// returned with empty covariance instead of an error.
pub fn point_at_effective_detuning(p: &StationaryParams, delta: f64) -> Result<StationaryPoint> {
    let (q, s) = steady_state_at_effective_detuning(p, delta)?;
    analyse(q, s)
}

/// Points on a grid of effective detunings, in grid order.
pub fn detuning_sweep(p: &StationaryParams, deltas: &[f64]) -> Result<Vec<StationaryPoint>> {
    deltas.par_iter().map(|&d| point_at_effective_detuning(p, d)).collect()
}

/// Δ = 0 closed forms of the mirror variances:
/// V₁₁ = 1/2 + n̄ + G²(κ+γ)/(2γ(κ² + κγ + ω_m²)), V₂₂ = 1/2 + n̄ + G²κ/(2γ(κ² + κγ + ω_m²)).
pub fn mirror_variances_zero_detuning(p: &StationaryParams, big_g: f64) -> (f64, f64) {
    let (k, gm, wm) = (p.kappa, p.gamma_m, p.omega_m);
    let den = 2.0 * gm * (k * k + k * gm + wm * wm);
    let base = 0.5 + p.n_bar;
    (base + big_g * big_g * (k + gm) / den, base + big_g * big_g * k / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn toy() -> StationaryParams {
        StationaryParams { omega_m: 1.0, gamma_m: 1e-2, kappa: 0.7, delta0: 0.3, g: 1e-3, drive_e: 200.0, n_bar: 5.0 }
    }

    #[test]
    fn reference_set() {
        let d = derive_physical_params(&PhysicalInputs::reference()).unwrap();
        assert!((d.params.n_bar - 832.8).abs() < 1.0, "{}", d.params.n_bar);
        assert!(d.warning.is_none());
        assert_abs_diff_eq!(d.params.kappa, 8.802_110_1e7, epsilon = 10.0);
        let mut half = PhysicalInputs::reference();
        half.convention = KappaConvention::HalfWidth;
        assert_abs_diff_eq!(derive_physical_params(&half).unwrap().params.kappa, 0.5 * d.params.kappa, epsilon = 1e-6);
        let mut cold = PhysicalInputs::reference();
        cold.temperature = 0.0;
        assert_eq!(derive_physical_params(&cold).unwrap().params.n_bar, 0.0);
        let mut twice = PhysicalInputs::reference();
        twice.power *= 2.0;
        let e2 = derive_physical_params(&twice).unwrap().params.drive_e.powi(2);
        assert_abs_diff_eq!(e2 / d.params.drive_e.powi(2), 2.0, epsilon = 1e-12);
        let mut bad = PhysicalInputs::reference();
        bad.mass = -1.0;
        assert!(derive_physical_params(&bad).is_err());
        let mut long = PhysicalInputs::reference();
        long.length = 0.5;
        assert!(derive_physical_params(&long).unwrap().warning.is_some());
    }

    #[test]
    fn linear_cavity_root() {
        let p = StationaryParams { g: 0.0, ..toy() };
        let s = steady_state(&p).unwrap();
        assert_eq!(s.len(), 1);
        assert_abs_diff_eq!(s[0].alpha_s.powi(2), 200.0f64.powi(2) / (0.49 + 0.09), epsilon = 1e-8);
    }

    #[test]
    fn resonant_drive_has_one_root() {
        let p = StationaryParams { delta0: 0.0, ..toy() };
        let s = steady_state(&p).unwrap();
        assert_eq!(s.len(), 1);
        let u = s[0].alpha_s.powi(2);
        let c = p.g * p.g / p.omega_m;
        assert_abs_diff_eq!(u * (p.kappa.powi(2) + c * c * u * u), p.drive_e.powi(2), epsilon = 1e-8 * p.drive_e.powi(2));
    }

    #[test]
    fn bistable_branches() {
        // golden values from numpy.roots on the same cubic
        let p = StationaryParams { delta0: 3.0, kappa: 0.2, g: 1e-2, drive_e: 100.0, ..toy() };
        let s = steady_state(&p).unwrap();
        assert_eq!(s.len(), 3);
        let us: Vec<f64> = s.iter().map(|x| x.alpha_s.powi(2)).collect();
        let want = BISTABLE_ROOTS;
        for (u, w) in us.iter().zip(want) {
            assert_abs_diff_eq!(*u, w, epsilon = 1e-8 * w);
        }
        for st in &s {
            assert_eq!(st.p_s, 0.0);
            assert_abs_diff_eq!(st.q_s, p.g / p.omega_m * st.alpha_s.powi(2), epsilon = 1e-12);
            assert_abs_diff_eq!(st.big_g, p.g * st.alpha_s * std::f64::consts::SQRT_2, epsilon = 1e-12);
        }
    }

    const BISTABLE_ROOTS: [f64; 3] = [1199.832_532_946_612_2, 23_839.932_889_524_26, 34_960.234_577_529_16];

    #[test]
    fn drift_structure() {
        let p = toy();
        let s = steady_state(&p).unwrap()[0];
        let (a, d) = drift_and_diffusion(&p, &s);
        assert_abs_diff_eq!(a.trace(), -p.gamma_m - 2.0 * p.kappa, epsilon = 1e-15);
        assert_eq!(d[(1, 1)], p.gamma_m * (2.0 * p.n_bar + 1.0));
        let s0 = SteadyState { big_g: 0.0, ..s };
        let (a0, _) = drift_and_diffusion(&p, &s0);
        assert_eq!(a0.fixed_view::<2, 2>(0, 2).amax(), 0.0);
        assert_eq!(a0.fixed_view::<2, 2>(2, 0).amax(), 0.0);
        assert!(stability_check(&p, &s0).stable);
    }

    #[test]
    fn lyapunov_trivial() {
        let a = -RMat::identity(4, 4);
        let v = lyapunov_solve(&a, &RMat::identity(4, 4)).unwrap();
        assert!((v - RMat::identity(4, 4) * 0.5).amax() < 1e-15);
        assert_eq!(lyapunov_solve(&RMat::identity(2, 2), &RMat::identity(2, 2)).unwrap_err(), Error::Unstable);
    }

    #[test]
    fn zero_detuning_closed_forms() {
        let p = toy();
        for big_g in [0.0, 0.05, 0.3] {
            let s = SteadyState { alpha_s: 0.0, q_s: 0.0, p_s: 0.0, delta: 0.0, big_g };
            assert!(stability_check(&p, &s).stable);
            let (a, d) = drift_and_diffusion(&p, &s);
            let v = lyapunov_solve(&RMat::from_iterator(4, 4, a.iter().copied()), &RMat::from_iterator(4, 4, d.iter().copied())).unwrap();
            let (v11, v22) = mirror_variances_zero_detuning(&p, big_g);
            assert_abs_diff_eq!(v[(0, 0)], v11, epsilon = 1e-8 * v11);
            assert_abs_diff_eq!(v[(1, 1)], v22, epsilon = 1e-8 * v22);
            assert_abs_diff_eq!(v[(0, 1)], 0.0, epsilon = 1e-10);
        }
    }
}
