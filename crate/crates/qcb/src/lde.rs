//! Probe spins coupled through a gapped or critical spin bus: bus
//! susceptibilities, the perturbative effective coupling and the
//! three-parameter canonical model of the probe pair at finite temperature.
//!
//! Probe operators τ use Pauli normalization, so ⟨τ_a·τ_b⟩ ∈ [-3, 1].
//! Ring susceptibilities are in units of 𝒜/v_F (both set to 1).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::fit::{levenberg_marquardt, LmOptions};
use crate::linalg::tau_dot_tau;
use crate::qstate::{thermal_state, DensityMatrix};
use crate::quad::integrate;
use crate::{Error, Result, C64};

use std::f64::consts::PI;

/// Ring of L sites with probes r sites apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingGeometry {
    pub l: usize,
    pub r: usize,
}

impl RingGeometry {
    pub fn new(l: usize, r: usize) -> Result<Self> {
        if r == 0 || r >= l {
            return Err(Error::Domain(format!("separation r = {r} on a ring of {l} sites")));
        }
        Ok(Self { l, r })
    }

    /// Separation folded into [1, L/2].
    pub fn folded(&self) -> usize {
        self.r.min(self.l - self.r)
    }

    /// x = 2πr/L ∈ (0, π].
    pub fn x(&self) -> f64 {
        2.0 * PI * self.folded() as f64 / self.l as f64
    }
}

/// ∫_x^π (τ/π - 1)/√(cos x - cos τ) dτ with τ = x + u².
pub fn ring_integral(x: f64, tol: f64) -> Result<f64> {
    if !(x > 0.0 && x <= PI) {
        return Err(Error::Domain(format!("x = {x} outside (0, π]")));
    }
    if x == PI {
        return Ok(0.0);
    }
    let f = |u: f64| {
        let h = 0.5 * u * u;
        let tau = x + u * u;
        // cos x - cos τ = 2 sin((τ+x)/2) sin((τ-x)/2); divide the u² out of sin(h)
        let s = if h > 1e-8 { h.sin() / (u * u) } else { 0.5 * (1.0 - h * h / 6.0) };
        let den = (2.0 * (x + h).sin() * s).sqrt();
        2.0 * (tau / PI - 1.0) / den
    };
    Ok(integrate(f, 0.0, (PI - x).sqrt(), tol, tol)?.value)
}

/// Heisenberg-ring static susceptibility 𝒞·I(x), 𝒞 = (-1)^r/√2.
pub fn chi_ring(geom: &RingGeometry) -> Result<f64> {
    let sign = if geom.folded() % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign / std::f64::consts::SQRT_2 * ring_integral(geom.x(), 1e-11)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AkltMethod {
    Closed,
    Numeric,
}

/// AKLT gap ω_π = 10/27 and correlation length 1/ln 3.
pub const AKLT_GAP: f64 = 10.0 / 27.0;

/// Static probe-probe susceptibility of the AKLT chain at separation r.
pub fn chi_aklt(r: usize, method: AkltMethod) -> Result<f64> {
    if r < 1 {
        return Err(Error::Domain("AKLT separation must be ≥ 1".into()));
    }
    match method {
        AkltMethod::Closed => {
            // (27/10)(1 + 4r/3)3^{-r} = 27(3 + 4r)/(30·3^r): integers up to r ≈ 30,
            // so a single correctly rounded division
            let sign = if r % 2 == 1 { 1.0 } else { -1.0 };
            let rf = r as f64;
            Ok(sign * (27.0 * (3.0 + 4.0 * rf)) / (30.0 * 3f64.powi(r as i32)))
        }
        AkltMethod::Numeric => {
            // single-mode spectral integral; both time orderings and the
            // response sign give the factor -2
            let (a, b) = (-2.0 / 3.0, 80.0 / 81.0);
            let rf = r as f64;
            let f = |q: f64| {
                let w = 5.0 * (5.0 + 3.0 * q.cos()) / 27.0;
                (q * rf).cos() / w * (a + b / w)
            };
            let v = integrate(f, 0.0, PI, 1e-13, 1e-13)?.value / PI;
            Ok(-2.0 * v)
        }
    }
}

/// J_eff = J_p² χ.
pub fn effective_coupling(j_p: f64, chi: f64) -> f64 {
    j_p * j_p * chi
}

/// ⟨τ_a·τ_b⟩ in exp(-βJ τ_a·τ_b): (e^{-4βJ} - 1)/(e^{-4βJ} + 1/3).
pub fn probe_correlator(j_ab: f64, beta: f64) -> f64 {
    let y = (-4.0 * beta * j_ab).exp();
    if y.is_infinite() {
        return 1.0;
    }
    (y - 1.0) / (y + 1.0 / 3.0)
}

/// exp(-βJ_ab τ_a·τ_b)/Z.
pub fn probe_state_thermal(j_ab: f64, beta: f64) -> Result<DensityMatrix> {
    if !(beta * j_ab).is_finite() {
        return Err(Error::Domain(format!("βJ = {}", beta * j_ab)));
    }
    thermal_state(&(tau_dot_tau() * C64::new(j_ab, 0.0)), beta, Some((2, 2)))
}

/// (J_can, Φ, η): singlet-triplet gap, singlet delocalization and
/// correlator offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalParams {
    pub j_can: f64,
    pub phi: f64,
    pub eta: f64,
}

impl CanonicalParams {
    pub fn new(j_can: f64, phi: f64, eta: f64) -> Result<Self> {
        let s = eta + 3.0 * phi;
        if !(-1e-12..=4.0 + 1e-12).contains(&s) || !j_can.is_finite() {
            return Err(Error::Domain(format!("η + 3Φ = {s} outside [0, 4] or J_can = {j_can}")));
        }
        Ok(Self { j_can, phi, eta })
    }

    /// Spin-chain row of the canonical-parameter table (J = 1).
    pub fn chain_table_row() -> Self {
        Self { j_can: 5.07e-4, phi: 1.03e-2, eta: 6.23e-4 }
    }

    /// Square-lattice row of the canonical-parameter table (J = 1).
    pub fn square_table_row() -> Self {
        Self { j_can: 3.04e-3, phi: 0.146, eta: -1.34e-2 }
    }

    /// ⟨τ_a·τ_b⟩ = η + (1-Φ)(e^{-βJ} - 1)/(e^{-βJ} + 1/3).
    pub fn correlator(&self, beta: f64) -> f64 {
        let y = (-beta * self.j_can).exp();
        if y.is_infinite() {
            return self.eta + (1.0 - self.phi);
        }
        self.eta + (1.0 - self.phi) * (y - 1.0) / (y + 1.0 / 3.0)
    }

    pub fn zero_temperature_correlator(&self) -> f64 {
        -3.0 + self.eta + 3.0 * self.phi
    }

    /// Temperature-dependent effective coupling J_ab(β).
    pub fn j_ab(&self, beta: f64) -> Result<f64> {
        if !(beta > 0.0) {
            return Err(Error::Domain(format!("beta = {beta}")));
        }
        let (phi, eta) = (self.phi, self.eta);
        // numerator and denominator divided by e^{βJ}
        let y = (-beta * self.j_can).exp();
        let num = 3.0 * (phi - eta) * y + (4.0 - 3.0 * phi - eta);
        let den = (4.0 - phi + eta) * y + (phi + eta / 3.0);
        if !(num > 0.0 && den > 0.0) || !(num / den).is_finite() {
            return Err(Error::Domain(format!("log argument {num:e}/{den:e}")));
        }
        Ok((num / den).ln() / (4.0 * beta))
    }

    /// lim β→∞ of βJ_ab: (1/4) ln[(4-3Φ-η)/(Φ+η/3)].
    pub fn zero_temperature_beta_jab(&self) -> f64 {
        0.25 * ((4.0 - 3.0 * self.phi - self.eta) / (self.phi + self.eta / 3.0)).ln()
    }

    /// Two leading terms of J_ab at high temperature:
    /// (k_B T/4) ln[(1-η)/(1+η/3)] + (J_can/4)[(4-Φ+η)/(4+4η/3) - 3(Φ-η)/(4-4η)],
    /// i.e. J_can(1-Φ)/4 - k_B T η/3 to first order in η.
    pub fn high_temperature_jab(&self, t: f64) -> f64 {
        let (phi, eta) = (self.phi, self.eta);
        0.25 * t * ((1.0 - eta) / (1.0 + eta / 3.0)).ln()
            + 0.25 * self.j_can * ((4.0 - phi + eta) / (4.0 + 4.0 * eta / 3.0) - 3.0 * (phi - eta) / (4.0 - 4.0 * eta))
    }
}

/// J_ab from a measured correlator: e^{4βJ_ab} = (1 - c)/(1 + c/3).
pub fn jab_from_correlator(c: f64, beta: f64) -> Result<f64> {
    let arg = (1.0 - c) / (1.0 + c / 3.0);
    if !(arg > 0.0) || !(beta > 0.0) {
        return Err(Error::Domain(format!("correlator {c} at beta {beta}")));
    }
    Ok(arg.ln() / (4.0 * beta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalTemperature {
    /// Exact k_B T* where the concurrence vanishes; None if never entangled.
    pub kt_star: Option<f64>,
    /// 0.93 J_can (1 - Φ).
    pub estimate: f64,
    /// J_can (1 - Φ)/ln 3.
    pub saturation_estimate: f64,
}

impl CriticalTemperature {
    pub fn never_entangled(&self) -> bool {
        self.kt_star.is_none()
    }
}

/// Solves ⟨τ_a·τ_b⟩(β) = -1 by bisection on β.
pub fn critical_temperature(cp: &CanonicalParams) -> Result<CriticalTemperature> {
    if !(cp.j_can > 0.0) {
        return Err(Error::Domain(format!("J_can = {} must be positive", cp.j_can)));
    }
    let estimate = 0.93 * cp.j_can * (1.0 - cp.phi);
    let saturation_estimate = cp.j_can * (1.0 - cp.phi) / 3f64.ln();
    let kt_star = bisect_beta(|b| cp.correlator(b) + 1.0, 1.0 / cp.j_can)?.map(|b| 1.0 / b);
    Ok(CriticalTemperature { kt_star, estimate, saturation_estimate })
}

/// Root of a function that is positive at β = 0 and eventually negative;
/// None if no sign change is found.
pub fn bisect_beta(f: impl Fn(f64) -> f64, scale: f64) -> Result<Option<f64>> {
    if !(f(0.0) > 0.0) {
        return Ok(None);
    }
    let mut hi = scale;
    let mut tries = 0;
    while f(hi) >= 0.0 {
        hi *= 2.0;
        tries += 1;
        if tries > 200 {
            return Ok(None);
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleKind {
    Correlator,
    Jab,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CanonicalFit {
    pub params: CanonicalParams,
    /// RMS residual of the correlator.
    pub rms: f64,
    pub iterations: usize,
}

fn project_box(x: &mut DVector<f64>) {
    // x = (J/J0, Φ, η); keep J > 0 and 0 ≤ η + 3Φ ≤ 4
    x[0] = x[0].max(1e-12);
    let s = x[2] + 3.0 * x[1];
    let shift = if s < 0.0 { -s } else if s > 4.0 { 4.0 - s } else { 0.0 };
    x[1] += 0.3 * shift;
    x[2] += 0.1 * shift;
}

/// Least-squares fit of the canonical correlator to (β, value) samples.
pub fn fit_canonical_params(samples: &[(f64, f64)], kind: SampleKind) -> Result<CanonicalFit> {
    if samples.len() < 4 {
        return Err(Error::Domain(format!("{} samples, need ≥ 4", samples.len())));
    }
    let data: Vec<(f64, f64)> = samples
        .iter()
        .map(|&(b, v)| {
            if !(b > 0.0) {
                return Err(Error::Domain(format!("beta = {b}")));
            }
            Ok(match kind {
                SampleKind::Correlator => (b, v),
                SampleKind::Jab => (b, probe_correlator(v, b)),
            })
        })
        .collect::<Result<_>>()?;
    // Φ from the low-T plateau; J from the high-T saturation J_ab → J(1-Φ)/4
    // when that end is informative, plus one start per sampled temperature
    // scale so a washed-out hot end cannot strand the search on a plateau.
    let hot = data.iter().min_by(|a, b| a.0.total_cmp(&b.0)).expect("non-empty");
    let cold = data.iter().max_by(|a, b| a.0.total_cmp(&b.0)).expect("non-empty");
    let phi0 = ((cold.1 + 3.0) / 3.0).clamp(0.0, 0.9);
    let j_hot = jab_from_correlator(hot.1, hot.0).map(|j| 4.0 * j / (1.0 - phi0)).ok();
    let mut starts: Vec<f64> = j_hot.into_iter().filter(|j| j.is_finite() && *j != 0.0).collect();
    starts.extend(data.iter().map(|&(b, _)| 1.0 / b));
    let mut best: Option<CanonicalFit> = None;
    let mut last_err = None;
    for j0 in starts {
        match fit_from(&data, j0, phi0) {
            Ok(f) => {
                if best.as_ref().is_none_or(|b| f.rms < b.rms) {
                    best = Some(f);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.expect("at least one start"))
}

fn fit_from(data: &[(f64, f64)], j0: f64, phi0: f64) -> Result<CanonicalFit> {
    let model = |x: &DVector<f64>| {
        let (j, phi, eta) = (x[0] * j0, x[1], x[2]);
        let n = data.len();
        let mut r = DVector::zeros(n);
        let mut jac = DMatrix::zeros(n, 3);
        for (i, &(b, c)) in data.iter().enumerate() {
            let y = (-b * j).exp();
            let g = (y - 1.0) / (y + 1.0 / 3.0);
            let dg = -(4.0 / 3.0) * y / (y + 1.0 / 3.0).powi(2);
            r[i] = eta + (1.0 - phi) * g - c;
            jac[(i, 0)] = (1.0 - phi) * dg * b * j0;
            jac[(i, 1)] = -g;
            jac[(i, 2)] = 1.0;
        }
        (r, jac)
    };
    let res = levenberg_marquardt(model, project_box, DVector::from_vec(vec![1.0, phi0, 0.0]), LmOptions::default())?;
    Ok(CanonicalFit {
        params: CanonicalParams { j_can: res.x[0] * j0, phi: res.x[1], eta: res.x[2] },
        rms: res.rms(),
        iterations: res.iterations,
    })
}

/// kT grid of `n` log-spaced points from J/20 to 20J.
pub fn temperature_grid(j_can: f64, n: usize) -> Vec<f64> {
    let (lo, hi) = ((j_can / 20.0).ln(), (20.0 * j_can).ln());
    (0..n).map(|i| (lo + (hi - lo) * i as f64 / (n.max(2) - 1) as f64).exp()).collect()
}
