//! Exact unitary cavity–mirror model (radiation-pressure coupling, mirror
//! initially thermal, cavity initially coherent).
//!
//! Units: ω_m = 1, so `t` is a phase of the mirror period and `k = g/ω_m`.
//! The evolved state is
//!
//! ρ(t) = Σ_nm Θ_nm e^{iφ_nm} |n⟩⟨m| ⊗ D(β_n) ρ_th D†(β_m),  β_n = k n η(t),
//!
//! with η(t) = 1 - e^{-it}, Λ(t) = t - sin t, φ_nm = k²Λ(n² - m²) - ω_c t (n - m)
//! and Θ_nm = α^n ᾱ^m e^{-|α|²}/√(n! m!). Mirror matrix elements come from the
//! generating function of D(β_n) ρ_th D†(β_m), whose exponent is bilinear in
//! the source variables; its derivatives reduce to a finite Leibniz sum.
//!
//! Bipartite ordering: cavity is subsystem A (slow index), mirror is B.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::qstate::{partial_transpose_raw, DensityMatrix, Subsystem};
use crate::{CMat, Error, Result, C64};

/// Marker values above this count as entangled.
pub const MARKER_TOL: f64 = 1e-14;
/// Poisson tail mass allowed beyond the Fock cutoff.
pub const TAIL_TOL: f64 = 1e-12;
/// Projections with smaller trace are treated as empty.
pub const EMPTY_TRACE: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptoUnitaryParams {
    pub k: f64,
    pub alpha: C64,
    pub n_bar: f64,
    pub t: f64,
    #[serde(default)]
    pub omega_c: f64,
}

impl OptoUnitaryParams {
    pub fn new(k: f64, alpha: C64, n_bar: f64, t: f64) -> Result<Self> {
        if !(k >= 0.0) || !k.is_finite() {
            return Err(Error::Domain(format!("coupling k = {k}")));
        }
        if !(n_bar >= 0.0) || !n_bar.is_finite() {
            return Err(Error::Domain(format!("thermal occupancy n_bar = {n_bar}")));
        }
        if !t.is_finite() || !alpha.re.is_finite() || !alpha.im.is_finite() {
            return Err(Error::Domain("non-finite time or amplitude".into()));
        }
        Ok(Self { k, alpha, n_bar, t, omega_c: 0.0 })
    }

    pub fn with_omega_c(mut self, omega_c: f64) -> Self {
        self.omega_c = omega_c;
        self
    }

    pub fn at_time(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn with_k(mut self, k: f64) -> Self {
        self.k = k;
        self
    }

    /// η(t) = 1 - e^{-it}.
    pub fn eta(&self) -> C64 {
        C64::new(1.0 - self.t.cos(), self.t.sin())
    }

    /// Λ(t) = t - sin t.
    pub fn lambda(&self) -> f64 {
        self.t - self.t.sin()
    }

    /// x = n̄/(n̄+1), the thermal Boltzmann ratio.
    pub fn x(&self) -> f64 {
        self.n_bar / (self.n_bar + 1.0)
    }

    /// y² = |kη|² = 4k² sin²(t/2).
    pub fn y2(&self) -> f64 {
        let s = (0.5 * self.t).sin();
        4.0 * self.k * self.k * s * s
    }
}

/// Ordered cavity and mirror Fock levels spanning a projected subspace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubspaceSelector {
    cavity: Vec<usize>,
    mirror: Vec<usize>,
}

impl SubspaceSelector {
    pub fn new(cavity_levels: Vec<usize>, mirror_levels: Vec<usize>) -> Result<Self> {
        for (name, l) in [("cavity", &cavity_levels), ("mirror", &mirror_levels)] {
            if l.is_empty() {
                return Err(Error::Domain(format!("{name} levels empty")));
            }
            if l.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Domain(format!("{name} levels {l:?} not strictly increasing")));
            }
        }
        Ok(Self { cavity: cavity_levels, mirror: mirror_levels })
    }

    /// All levels 0..n_cav × 0..n_mir.
    pub fn truncation(n_cav: usize, n_mir: usize) -> Self {
        Self { cavity: (0..n_cav).collect(), mirror: (0..n_mir).collect() }
    }

    pub fn cavity_levels(&self) -> &[usize] {
        &self.cavity
    }

    pub fn mirror_levels(&self) -> &[usize] {
        &self.mirror
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.cavity.len(), self.mirror.len())
    }
}

fn ln_factorial(n: usize) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let t = TABLE.get_or_init(|| {
        let mut v = vec![0.0; 4096];
        for i in 1..v.len() {
            v[i] = v[i - 1] + (i as f64).ln();
        }
        v
    });
    if n < t.len() {
        t[n]
    } else {
        t[t.len() - 1] + ((t.len())..=n).map(|i| (i as f64).ln()).sum::<f64>()
    }
}

/// Poisson weights e^{-λ} λ^n/n! for n = 0..=cutoff.
pub fn poisson_weights(lambda: f64, cutoff: usize) -> Vec<f64> {
    (0..=cutoff)
        .map(|n| {
            if lambda == 0.0 {
                if n == 0 { 1.0 } else { 0.0 }
            } else {
                (n as f64 * lambda.ln() - lambda - ln_factorial(n)).exp()
            }
        })
        .collect()
}

/// Fock cutoff ⌈|α|² + 10√(|α|²+1)⌉.
pub fn fock_cutoff(mean: f64) -> usize {
    (mean + 10.0 * (mean + 1.0).sqrt()).ceil() as usize
}

/// Θ_nm = α^n ᾱ^m e^{-|α|²}/√(n! m!), evaluated in log space.
fn theta(alpha: C64, n: usize, m: usize) -> C64 {
    let a = alpha.norm();
    if a == 0.0 {
        return if n == 0 && m == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
    }
    let lm = (n + m) as f64 * a.ln() - a * a - 0.5 * (ln_factorial(n) + ln_factorial(m));
    C64::from_polar(lm.exp(), (n as f64 - m as f64) * alpha.arg())
}

/// ⟨μ| D(β_n) ρ_th D†(β_m) |ν⟩ for β_n = kn η, β_m = km η.
fn mirror_element(bn: C64, bm: C64, x: f64, mu: usize, nu: usize) -> C64 {
    // generating function exp(c0 + x ab + A a + B b)/(n̄+1)
    let p = bn.conj();
    let q = bm;
    let c0 = -(bn.norm_sqr() + bm.norm_sqr()) * 0.5 + x * p * q;
    let a_ = bn - x * q;
    let b_ = bm.conj() - x * p;
    let half = 0.5 * (ln_factorial(mu) + ln_factorial(nu));
    let mut s = C64::new(0.0, 0.0);
    for j in 0..=mu.min(nu) {
        let coef = (half - ln_factorial(j) - ln_factorial(mu - j) - ln_factorial(nu - j)).exp();
        let xj = if j == 0 { 1.0 } else { x.powi(j as i32) };
        s += coef * xj * a_.powu((mu - j) as u32) * b_.powu((nu - j) as u32);
    }
    c0.exp() * s * (1.0 - x)
}

/// ⟨n, μ| ρ(t) |m, ν⟩ with cavity indices (n, m) and mirror indices (μ, ν).
pub fn rho_element(p: &OptoUnitaryParams, n: usize, m: usize, mu: usize, nu: usize) -> C64 {
    let th = theta(p.alpha, n, m);
    if th == C64::new(0.0, 0.0) {
        return th;
    }
    let (nf, mf) = (n as f64, m as f64);
    let phase = C64::from_polar(1.0, p.k * p.k * p.lambda() * (nf * nf - mf * mf) - p.omega_c * p.t * (nf - mf));
    let eta = p.eta();
    th * phase * mirror_element(p.k * nf * eta, p.k * mf * eta, p.x(), mu, nu)
}

/// P ρ P on the selected levels, cavity slow; not normalized.
pub fn projected_matrix(p: &OptoUnitaryParams, sel: &SubspaceSelector) -> CMat {
    let (dc, dm) = sel.dims();
    let mut out = CMat::zeros(dc * dm, dc * dm);
    for (i, &n) in sel.cavity.iter().enumerate() {
        for (a, &mu) in sel.mirror.iter().enumerate() {
            for (j, &m) in sel.cavity.iter().enumerate() {
                for (b, &nu) in sel.mirror.iter().enumerate() {
                    let r = i * dm + a;
                    let c = j * dm + b;
                    if r <= c {
                        let v = rho_element(p, n, m, mu, nu);
                        out[(r, c)] = v;
                        out[(c, r)] = v.conj();
                    }
                }
            }
        }
    }
    out
}

/// Projected state. With `normalize` the trace is divided out; otherwise the
/// raw projection is returned together with its (≤ 1) trace.
pub fn projected_density(p: &OptoUnitaryParams, sel: &SubspaceSelector, normalize: bool) -> Result<(CMat, f64)> {
    let m = projected_matrix(p, sel);
    let tr = m.trace().re;
    if tr < EMPTY_TRACE {
        return Err(Error::EmptySubspace(tr));
    }
    if normalize {
        Ok((m / C64::new(tr, 0.0), tr))
    } else {
        Ok((m, tr))
    }
}

/// Normalized projection as a validated [`DensityMatrix`].
pub fn projected_state(p: &OptoUnitaryParams, sel: &SubspaceSelector) -> Result<DensityMatrix> {
    let (m, _) = projected_density(p, sel, true)?;
    DensityMatrix::normalized(m, Some(sel.dims()))
}

/// Υ = -det[(P ρ P)^{T_A}] on the unnormalized projection.
pub fn marker_upsilon(p: &OptoUnitaryParams, sel: &SubspaceSelector) -> Result<f64> {
    let (dc, dm) = sel.dims();
    if dc != 2 || !(dm == 2 || dm == 3) {
        return Err(Error::Dimension(format!("marker needs a 2x2 or 2x3 subspace, got {dc}x{dm}")));
    }
    let m = projected_matrix(p, sel);
    Ok(-partial_transpose_raw(&m, dc, dm, Subsystem::A).determinant().re)
}

pub fn marker_entangled(upsilon: f64) -> bool {
    upsilon > MARKER_TOL
}

/// Tangle of the normalized [0,1;0,1] projection at t = π for a
/// zero-temperature mirror: 16k²|α|²e^{4k²}/(e^{4k²} + (1+4k²)|α|²)².
pub fn subspace_tangle_t0(p: &OptoUnitaryParams) -> Result<f64> {
    if p.n_bar != 0.0 {
        return Err(Error::Domain(format!("closed-form tangle needs a pure state, n_bar = {}", p.n_bar)));
    }
    let k2 = p.k * p.k;
    let a2 = p.alpha.norm_sqr();
    // divide through by e^{4k²} to stay finite for large k
    let e = (-4.0 * k2).exp();
    let den = 1.0 + (1.0 + 4.0 * k2) * a2 * e;
    Ok(16.0 * k2 * a2 * e / (den * den))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearEntropies {
    pub total: f64,
    pub cavity: f64,
    pub mirror: f64,
}

/// Lag autocorrelation c_d = Σ_p w_p w_{p+d} of the photon-number
/// distribution; everything time-dependent in the linear entropies is a
/// Gaussian in the lag d.
#[derive(Debug, Clone)]
pub struct PhotonStatistics {
    c: Vec<f64>,
    pub cutoff: usize,
}

impl PhotonStatistics {
    pub fn new(mean: f64, cutoff: Option<usize>) -> Result<Self> {
        let cutoff = cutoff.unwrap_or_else(|| fock_cutoff(mean));
        let w = poisson_weights(mean, cutoff);
        let tail = (1.0 - w.iter().sum::<f64>()).max(0.0);
        if tail > TAIL_TOL {
            return Err(Error::Truncation { cutoff, tail });
        }
        let n = w.len();
        let c = (0..n).map(|d| (0..n - d).map(|p| w[p] * w[p + d]).sum()).collect();
        Ok(Self { c, cutoff })
    }

    /// Σ_pq w_p w_q e^{-s (p-q)²}.
    fn gauss_sum(&self, s: f64) -> f64 {
        let mut acc = self.c[0];
        for (d, cd) in self.c.iter().enumerate().skip(1) {
            let g = (-s * (d * d) as f64).exp();
            if g == 0.0 {
                break;
            }
            acc += 2.0 * cd * g;
        }
        acc
    }
}

/// Linear entropies 1 - Tr ρ² of the global, cavity and mirror states:
///
/// S_tot = 1 - 1/(2n̄+1)
/// S_cav = 1 - Σ_pq w_p w_q exp[-y²(p-q)²(2n̄+1)]
/// S_mir = 1 - Σ_pq w_p w_q exp[-y²(p-q)²/(2n̄+1)]/(2n̄+1)
pub fn linear_entropies_closed(p: &OptoUnitaryParams, cutoff: Option<usize>) -> Result<LinearEntropies> {
    let stats = PhotonStatistics::new(p.alpha.norm_sqr(), cutoff)?;
    Ok(linear_entropies_with(p, &stats))
}

pub fn linear_entropies_with(p: &OptoUnitaryParams, stats: &PhotonStatistics) -> LinearEntropies {
    let s = 2.0 * p.n_bar + 1.0;
    let y2 = p.y2();
    LinearEntropies {
        total: 1.0 - 1.0 / s,
        cavity: 1.0 - stats.gauss_sum(y2 * s),
        mirror: 1.0 - stats.gauss_sum(y2 / s) / s,
    }
}

fn mi_from(e: LinearEntropies) -> Result<f64> {
    let den = e.cavity + e.mirror;
    if den < 1e-12 {
        return Err(Error::UndefinedMutualInfo(den));
    }
    Ok(1.0 - e.total / den)
}

/// 𝓘(t) = 1 - S_tot/(S_cav + S_mir) with linear entropies.
pub fn normalized_mi_time(p: &OptoUnitaryParams) -> Result<f64> {
    mi_from(linear_entropies_closed(p, None)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AveragedMi {
    pub value: f64,
    /// Same average with twice the number of panels.
    pub doubled: f64,
    pub n_steps: usize,
}

impl AveragedMi {
    pub fn converged(&self, tol: f64) -> bool {
        (self.value - self.doubled).abs() <= tol
    }
}

/// Time average of 𝓘 over one mirror period by the composite trapezoid rule.
pub fn averaged_mi(p: &OptoUnitaryParams, n_steps: usize) -> Result<AveragedMi> {
    if n_steps < 64 {
        return Err(Error::Domain(format!("n_steps = {n_steps} < 64")));
    }
    let stats = PhotonStatistics::new(p.alpha.norm_sqr(), None)?;
    let avg = |n: usize| -> Result<f64> {
        let h = std::f64::consts::TAU / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            acc += w * mi_from(linear_entropies_with(&p.at_time(i as f64 * h), &stats))?;
        }
        Ok(acc / n as f64)
    };
    Ok(AveragedMi { value: avg(n_steps)?, doubled: avg(2 * n_steps)?, n_steps })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RenormalizationCheck {
    /// (|α|^{-2s} s!)^{d_B} Υ_[0,s](k/s)
    pub lhs: f64,
    /// |α|^{-2 d_B} Υ_[0,1](k)
    pub rhs: f64,
    /// |α|^{-2s} s! Υ_[0,s](k/s), without the mirror-dimension power
    pub lhs_single: f64,
    /// |α|^{-2} Υ_[0,1](k)
    pub rhs_single: f64,
}

impl RenormalizationCheck {
    pub fn rel_error(&self) -> f64 {
        let s = self.lhs.abs().max(self.rhs.abs());
        if s == 0.0 { 0.0 } else { (self.lhs - self.rhs).abs() / s }
    }
}

/// Subspace [0,s] at coupling k/s is the [0,1] problem at coupling k with the
/// level-s amplitude rescaled by λ = α^{s-1}/√s!, so the marker scales by
/// |λ|^{2 d_B}.
pub fn renormalization_check(p: &OptoUnitaryParams, s: usize, mirror_levels: &[usize]) -> Result<RenormalizationCheck> {
    if s < 1 {
        return Err(Error::Domain("s must be ≥ 1".into()));
    }
    let a2 = p.alpha.norm_sqr();
    if a2 == 0.0 {
        return Err(Error::Domain("renormalization needs α ≠ 0".into()));
    }
    let db = mirror_levels.len() as i32;
    let sel_s = SubspaceSelector::new(vec![0, s], mirror_levels.to_vec())?;
    let sel_1 = SubspaceSelector::new(vec![0, 1], mirror_levels.to_vec())?;
    let ups_s = marker_upsilon(&p.with_k(p.k / s as f64), &sel_s)?;
    let ups_1 = marker_upsilon(p, &sel_1)?;
    let scale = (ln_factorial(s) - s as f64 * a2.ln()).exp();
    Ok(RenormalizationCheck {
        lhs: scale.powi(db) * ups_s,
        rhs: a2.powi(-db) * ups_1,
        lhs_single: scale * ups_s,
        rhs_single: ups_1 / a2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigvalsh;
    use crate::qstate::{entropies, negativity, partial_trace, tangle};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn params(k: f64, a: f64, nb: f64, t: f64) -> OptoUnitaryParams {
        OptoUnitaryParams::new(k, C64::new(a, 0.0), nb, t).unwrap()
    }

    #[test]
    fn initial_state_factorizes() {
        let p = OptoUnitaryParams::new(0.7, C64::new(0.8, 0.3), 1.5, 0.0).unwrap();
        let x = p.x();
        for n in 0..3 {
            for m in 0..3 {
                for mu in 0..4 {
                    for nu in 0..4 {
                        let want = if mu == nu { theta(p.alpha, n, m) * (1.0 - x) * x.powi(mu as i32) } else { C64::new(0.0, 0.0) };
                        assert!((rho_element(&p, n, m, mu, nu) - want).norm() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn mirror_element_matches_fock_space_displacement() {
        // oracle: D(β) = exp(βa† - β̄a) on a large truncated Fock space
        let dim = 90;
        let ann = CMat::from_fn(dim, dim, |i, j| if j == i + 1 { C64::new((j as f64).sqrt(), 0.0) } else { C64::new(0.0, 0.0) });
        let disp = |b: C64| -> CMat { (ann.adjoint() * b - &ann * b.conj()).exp() };
        let x: f64 = 0.4;
        let th = CMat::from_fn(dim, dim, |i, j| if i == j { C64::new((1.0 - x) * x.powi(i as i32), 0.0) } else { C64::new(0.0, 0.0) });
        let (bn, bm) = (C64::new(0.3, -0.5), C64::new(-0.2, 0.7));
        let full = disp(bn) * th * disp(bm).adjoint();
        for mu in 0..8 {
            for nu in 0..8 {
                let e = mirror_element(bn, bm, x, mu, nu);
                assert!((e - full[(mu, nu)]).norm() < 1e-12, "({mu},{nu}): {e} vs {}", full[(mu, nu)]);
            }
        }
    }

    #[test]
    fn photon_number_conserved() {
        let base = OptoUnitaryParams::new(0.6, C64::new(0.9, -0.4), 0.8, 0.0).unwrap();
        let w = poisson_weights(base.alpha.norm_sqr(), 10);
        for &t in &[0.0, 0.7, PI, 4.1] {
            let p = base.at_time(t);
            for n in 0..4 {
                let s: C64 = (0..120).map(|mu| rho_element(&p, n, n, mu, mu)).sum();
                assert_abs_diff_eq!(s.re, w[n], epsilon = 1e-12);
                assert_abs_diff_eq!(s.im, 0.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn hermiticity() {
        let p = OptoUnitaryParams::new(0.9, C64::new(1.1, 0.5), 2.0, 2.3).unwrap().with_omega_c(3.0);
        for (n, m, mu, nu) in [(0, 1, 2, 3), (2, 1, 0, 4), (3, 3, 1, 2)] {
            let a = rho_element(&p, n, m, mu, nu);
            let b = rho_element(&p, m, n, nu, mu).conj();
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn purity_conserved_and_state_valid() {
        // 10 photon levels leave a Poisson tail of 1e-11; the largest
        // displacement then needs well under 120 phonon levels
        let p = params(0.5, 0.6, 0.3, 1.9);
        let (m, tr) = projected_density(&p, &SubspaceSelector::truncation(10, 120), false).unwrap();
        assert!((1.0 - tr).abs() < 1e-10, "{tr}");
        let purity: f64 = m.iter().map(|z| z.norm_sqr()).sum();
        assert_abs_diff_eq!(purity, 1.0 / (2.0 * p.n_bar + 1.0), epsilon = 1e-9);
        let s = projected_state(&p, &SubspaceSelector::new(vec![0, 2], vec![1, 3, 4]).unwrap()).unwrap();
        assert!(s.eigenvalues()[0] > -1e-12);
    }

    #[test]
    fn closed_entropies_match_truncated_matrices() {
        for &(k, a, nb, t) in &[(0.5, 0.6, 0.3, 1.9), (0.5, 0.6, 0.0, PI), (0.3, 0.5, 1.0, 0.8)] {
            let p = params(k, a, nb, t);
            let rho = projected_state(&p, &SubspaceSelector::truncation(10, 120)).unwrap();
            let cav = entropies(&partial_trace(&rho, Subsystem::A).unwrap());
            let mir = entropies(&partial_trace(&rho, Subsystem::B).unwrap());
            let cl = linear_entropies_closed(&p, None).unwrap();
            assert_abs_diff_eq!(1.0 - cav.purity, cl.cavity, epsilon = 1e-8);
            assert_abs_diff_eq!(1.0 - mir.purity, cl.mirror, epsilon = 1e-8);
            assert_abs_diff_eq!(1.0 - entropies(&rho).purity, cl.total, epsilon = 1e-8);
        }
    }

    #[test]
    fn closed_entropy_limits() {
        let p = params(0.8, 1.3, 2.0, 0.0);
        let e = linear_entropies_closed(&p, None).unwrap();
        assert_abs_diff_eq!(e.cavity, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.mirror, e.total, epsilon = 1e-14);
        for &t in &[0.4, 2.0, PI] {
            let e = linear_entropies_closed(&params(0.8, 1.3, 0.0, t), None).unwrap();
            assert_abs_diff_eq!(e.cavity, e.mirror, epsilon = 1e-14);
            let e2 = linear_entropies_closed(&params(0.8, 1.3, 2.0, t), None).unwrap();
            assert_abs_diff_eq!(e2.total, 0.8, epsilon = 1e-15);
        }
        assert!(matches!(linear_entropies_closed(&params(1.0, 3.0, 0.0, 1.0), Some(10)), Err(Error::Truncation { .. })));
    }

    #[test]
    fn mutual_info_periodic() {
        let p = params(1.0, 1.0, 1.0, 1e-9);
        let a = normalized_mi_time(&p).unwrap();
        let b = normalized_mi_time(&p.at_time(2.0 * PI + 1e-9)).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        assert!(matches!(normalized_mi_time(&params(1.0, 1.0, 0.0, 0.0)), Err(Error::UndefinedMutualInfo(_))));
    }

    #[test]
    fn closed_form_projection_at_half_period() {
        // zero temperature, [0,1;0,1], t = π: compare with the closed 4x4 form
        let (k, a) = (0.45, C64::new(0.7, 0.4));
        let p = OptoUnitaryParams::new(k, a, 0.0, PI).unwrap();
        let sel = SubspaceSelector::new(vec![0, 1], vec![0, 1]).unwrap();
        let (m, _) = projected_density(&p, &sel, true).unwrap();
        let want = closed_projection(k, a * C64::from_polar(1.0, k * k * PI));
        assert!((m - want).norm() < 1e-12);
    }

    /// Closed form of the normalized [0,1;0,1] projection at t = π, n̄ = 0, in
    /// our (cavity slow) basis order.
    fn closed_projection(k: f64, a: C64) -> CMat {
        let kk = (-2.0 * k * k).exp();
        let h = 1.0 + 4.0 * k * k;
        let a2 = a.norm_sqr();
        let z = C64::new(0.0, 0.0);
        let r = |x: f64| C64::new(x, 0.0);
        // basis (00, 10, 01, 11) with |cavity⟩⊗|mirror⟩
        #[rustfmt::skip]
        let closed = CMat::from_row_slice(4, 4, &[
            r(1.0),            a.conj() * kk,        z, a.conj() * 2.0 * k * kk,
            a * kk,            r(a2 * kk * kk),      z, r(2.0 * k * a2 * kk * kk),
            z,                 z,                    z, z,
            a * 2.0 * k * kk,  r(2.0 * k * a2 * kk * kk), z, r(4.0 * k * k * a2 * kk * kk),
        ]);
        let perm = [0, 2, 1, 3];
        CMat::from_fn(4, 4, |i, j| closed[(perm[i], perm[j])]) / r(1.0 + a2 * kk * kk * h)
    }

    #[test]
    fn tangle_matches_closed_form() {
        let p = params(1.0, 1.0, 0.0, PI);
        let sel = SubspaceSelector::new(vec![0, 1], vec![0, 1]).unwrap();
        let t = tangle(&projected_state(&p, &sel).unwrap()).unwrap();
        let e4 = 4f64.exp();
        let want = 16.0 * e4 / (e4 + 5.0).powi(2);
        assert_abs_diff_eq!(t, want, epsilon = 1e-10);
        assert_abs_diff_eq!(subspace_tangle_t0(&p).unwrap(), want, epsilon = 1e-12);
        assert_abs_diff_eq!(want, 0.245_941_802_678_726_1, epsilon = 1e-12);
        assert_eq!(subspace_tangle_t0(&params(0.0, 1.0, 0.0, PI)).unwrap(), 0.0);
        assert!(subspace_tangle_t0(&params(1.0, 1.0, 0.5, PI)).is_err());
        // large-α tail ~ |α|^{-2}
        let t1 = subspace_tangle_t0(&params(0.5, 1e3, 0.0, PI)).unwrap();
        let t2 = subspace_tangle_t0(&params(0.5, 2e3, 0.0, PI)).unwrap();
        assert_abs_diff_eq!(t1 / t2, 4.0, epsilon = 1e-5);
    }

    #[test]
    fn marker_examples() {
        let sel = SubspaceSelector::new(vec![0, 1], vec![0, 1]).unwrap();
        assert!(marker_upsilon(&params(0.4, 0.9, 0.0, 0.0), &sel).unwrap() <= MARKER_TOL);
        for &t in &[0.3, 1.0, PI, 5.0] {
            assert!(marker_entangled(marker_upsilon(&params(0.4, 0.9, 0.0, t), &sel).unwrap()));
        }
        let bad = SubspaceSelector::new(vec![0, 1, 2], vec![0, 1]).unwrap();
        assert!(matches!(marker_upsilon(&params(0.4, 0.9, 0.0, 1.0), &bad), Err(Error::Dimension(_))));
    }

    #[test]
    fn marker_tracks_negativity() {
        let sel = SubspaceSelector::new(vec![0, 1], vec![1, 2]).unwrap();
        for &(k, nb, t) in &[(0.2, 0.1, PI), (0.9, 0.5, 2.0), (0.5, 3.0, PI), (1.5, 0.05, 1.2)] {
            let p = params(k, 0.8, nb, t);
            let ups = marker_upsilon(&p, &sel).unwrap();
            let n = negativity(&projected_state(&p, &sel).unwrap()).unwrap().n;
            assert_eq!(ups > 0.0, n > 1e-12, "k={k} nb={nb} t={t}: Υ={ups:e}, N={n:e}");
        }
    }

    #[test]
    fn empty_subspace() {
        let p = params(0.3, 1e-3, 0.0, 0.0);
        let sel = SubspaceSelector::new(vec![6, 7], vec![5, 6]).unwrap();
        assert!(matches!(projected_density(&p, &sel, true), Err(Error::EmptySubspace(_))));
    }

    #[test]
    fn selector_validation() {
        assert!(SubspaceSelector::new(vec![], vec![0]).is_err());
        assert!(SubspaceSelector::new(vec![1, 1], vec![0]).is_err());
        assert!(SubspaceSelector::new(vec![2, 1], vec![0]).is_err());
        assert!(OptoUnitaryParams::new(-1.0, C64::new(1.0, 0.0), 0.0, 0.0).is_err());
        assert!(OptoUnitaryParams::new(1.0, C64::new(1.0, 0.0), -0.5, 0.0).is_err());
    }

    #[test]
    fn renormalization_examples() {
        let p = params(0.4, 1.3, 2.0, PI);
        let r = renormalization_check(&p, 1, &[3, 4, 5]).unwrap();
        assert!(r.rel_error() < 1e-14, "{r:?}");
        let r = renormalization_check(&p, 2, &[3, 4, 5]).unwrap();
        assert!(r.rel_error() < 1e-10, "{r:?}");
        let ev = eigvalsh(&projected_matrix(&p, &SubspaceSelector::new(vec![0, 2], vec![3, 4, 5]).unwrap()));
        assert!(ev[0] > -1e-15);
    }
}
