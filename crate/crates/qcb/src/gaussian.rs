//! Gaussian continuous-variable states in the covariance-matrix picture.
//!
//! Quadrature ordering is (X1, P1, X2, P2, ...), symplectic form
//! σ = ⊕ [[0, 1], [-1, 0]] and the vacuum has V = I/2. The Gaussian
//! log-negativity here uses the natural log, unlike the qubit-side E_N.

use nalgebra::{DVector, Matrix2, Matrix4, Vector4};
use rand::Rng;

use crate::linalg::eigvalsh;
use crate::{CMat, Error, RMat, Result, C64};

pub const SYM_TOL: f64 = 1e-12;
pub const PHYS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    v: RMat,
    mean: DVector<f64>,
}

/// The 2x2 blocks of a two-mode covariance matrix, V = [[A, C], [Cᵀ, B]].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModeBlocks {
    pub a: Matrix2<f64>,
    pub b: Matrix2<f64>,
    pub c: Matrix2<f64>,
}

/// Symplectic form for n modes.
pub fn omega(n: usize) -> RMat {
    let mut s = RMat::zeros(2 * n, 2 * n);
    for k in 0..n {
        s[(2 * k, 2 * k + 1)] = 1.0;
        s[(2 * k + 1, 2 * k)] = -1.0;
    }
    s
}

/// Smallest eigenvalue of V + (i/2)σ; non-negative for physical states.
pub fn uncertainty_min_eig(v: &RMat) -> f64 {
    let n = v.nrows() / 2;
    let s = omega(n);
    let m = CMat::from_fn(2 * n, 2 * n, |i, j| C64::new(v[(i, j)], 0.5 * s[(i, j)]));
    eigvalsh(&m)[0]
}

impl GaussianState {
    pub fn new(v: RMat, mean: DVector<f64>) -> Result<Self> {
        if !v.is_square() || v.nrows() % 2 != 0 || v.nrows() == 0 || mean.len() != v.nrows() {
            return Err(Error::Dimension(format!("covariance {}x{}, mean {}", v.nrows(), v.ncols(), mean.len())));
        }
        let asym = (&v - v.transpose()).amax();
        if asym > SYM_TOL * v.amax().max(1.0) {
            return Err(Error::NonPhysical(format!("asymmetry {asym:e}")));
        }
        let me = uncertainty_min_eig(&v);
        if me < -PHYS_TOL * v.amax().max(1.0) {
            return Err(Error::NonPhysical(format!("V + iσ/2 has eigenvalue {me:e}")));
        }
        Ok(Self { v, mean })
    }

    pub fn centered(v: RMat) -> Result<Self> {
        let n = v.nrows();
        Self::new(v, DVector::zeros(n))
    }

    pub fn vacuum(n: usize) -> Self {
        Self { v: RMat::identity(2 * n, 2 * n) * 0.5, mean: DVector::zeros(2 * n) }
    }

    /// Coherent state |α⟩ of a single mode: mean (√2 Re α, √2 Im α).
    pub fn coherent(alpha: C64) -> Self {
        let s = std::f64::consts::SQRT_2;
        Self { v: RMat::identity(2, 2) * 0.5, mean: DVector::from_vec(vec![s * alpha.re, s * alpha.im]) }
    }

    pub fn n_modes(&self) -> usize {
        self.v.nrows() / 2
    }

    pub fn cov(&self) -> &RMat {
        &self.v
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov4(&self) -> Result<Matrix4<f64>> {
        if self.n_modes() != 2 {
            return Err(Error::Dimension(format!("two-mode operation on {} modes", self.n_modes())));
        }
        Ok(Matrix4::from_fn(|i, j| self.v[(i, j)]))
    }

    /// V -> S V Sᵀ, d -> S d.
    pub fn transform(&self, s: &RMat) -> Result<Self> {
        let v = s * &self.v * s.transpose();
        let v = (&v + v.transpose()) * 0.5;
        Self::new(v, s * &self.mean)
    }
}

impl TwoModeBlocks {
    pub fn from_cov(v: &Matrix4<f64>) -> Self {
        Self {
            a: v.fixed_view::<2, 2>(0, 0).into_owned(),
            b: v.fixed_view::<2, 2>(2, 2).into_owned(),
            c: v.fixed_view::<2, 2>(0, 2).into_owned(),
        }
    }

    pub fn to_cov(&self) -> Matrix4<f64> {
        let mut v = Matrix4::zeros();
        v.fixed_view_mut::<2, 2>(0, 0).copy_from(&self.a);
        v.fixed_view_mut::<2, 2>(2, 2).copy_from(&self.b);
        v.fixed_view_mut::<2, 2>(0, 2).copy_from(&self.c);
        v.fixed_view_mut::<2, 2>(2, 0).copy_from(&self.c.transpose());
        v
    }

    pub fn det_a(&self) -> f64 {
        self.a.determinant()
    }
    pub fn det_b(&self) -> f64 {
        self.b.determinant()
    }
    pub fn det_c(&self) -> f64 {
        self.c.determinant()
    }

    /// Σ = det A + det B + 2 det C.
    pub fn sigma(&self) -> f64 {
        self.det_a() + self.det_b() + 2.0 * self.det_c()
    }

    /// Σ after partial transposition: det C flips sign.
    pub fn sigma_tilde(&self) -> f64 {
        self.det_a() + self.det_b() - 2.0 * self.det_c()
    }
}

/// Returns (d_-², d_+²) from the invariants, using the product d_+² d_-² = det V
/// for the small root to avoid cancellation.
fn sympl_sq(sigma: f64, det_v: f64) -> Result<(f64, f64)> {
    let disc = sigma * sigma - 4.0 * det_v;
    if disc < -PHYS_TOL * sigma.abs().max(1.0).powi(2) {
        return Err(Error::NonPhysical(format!("Σ² - 4 det V = {disc:e}")));
    }
    let root = disc.max(0.0).sqrt();
    let plus = 0.5 * (sigma + root);
    if plus <= 0.0 {
        return Err(Error::NonPhysical(format!("Σ = {sigma:e}")));
    }
    Ok((det_v / plus, plus))
}

/// (d_+, d_-) of a two-mode covariance matrix.
pub fn symplectic_eigenvalues_two_mode(v: &Matrix4<f64>) -> Result<(f64, f64)> {
    let bl = TwoModeBlocks::from_cov(v);
    let (m, p) = sympl_sq(bl.sigma(), v.determinant())?;
    Ok((p.sqrt(), m.max(0.0).sqrt()))
}

/// Smallest symplectic eigenvalue of the partially transposed state.
pub fn ppt_tilde_dminus(v: &Matrix4<f64>) -> Result<f64> {
    let bl = TwoModeBlocks::from_cov(v);
    let (m, _) = sympl_sq(bl.sigma_tilde(), v.determinant())?;
    Ok(m.max(0.0).sqrt())
}

/// max[0, -ln(2 d̃_-)].
pub fn logneg_gaussian(v: &Matrix4<f64>) -> Result<f64> {
    let d = ppt_tilde_dminus(v)?;
    Ok((-(2.0 * d).ln()).max(0.0))
}

/// det A + det B + 2|det C| ≤ 1/4 + 4 det V; true means PPT (separable).
pub fn simon_invariant_check(v: &Matrix4<f64>) -> bool {
    let bl = TwoModeBlocks::from_cov(v);
    let lhs = bl.det_a() + bl.det_b() + 2.0 * bl.det_c().abs();
    let rhs = 0.25 + 4.0 * v.determinant();
    lhs <= rhs + 1e-12 * rhs.abs().max(1.0)
}

/// Diagonal thermal covariance, (2n̄_k + 1)/2 per quadrature.
pub fn thermal_cov(n_bars: &[f64]) -> Result<GaussianState> {
    if n_bars.is_empty() {
        return Err(Error::Dimension("no modes".into()));
    }
    if let Some(n) = n_bars.iter().find(|n| !(**n >= 0.0)) {
        return Err(Error::Domain(format!("thermal occupancy {n}")));
    }
    let d = DVector::from_iterator(2 * n_bars.len(), n_bars.iter().flat_map(|n| [n + 0.5, n + 0.5]));
    GaussianState::centered(RMat::from_diagonal(&d))
}

/// Two-mode squeezer acting on modes (1, 2) with squeezing r and phase θ.
pub fn two_mode_squeezer(r: f64, theta: f64) -> RMat {
    let (c, s) = (r.cosh(), r.sinh());
    let rot = Matrix2::new(theta.cos(), theta.sin(), theta.sin(), -theta.cos());
    let mut m = RMat::zeros(4, 4);
    for i in 0..2 {
        m[(i, i)] = c;
        m[(i + 2, i + 2)] = c;
        for j in 0..2 {
            m[(i, j + 2)] = s * rot[(i, j)];
            m[(i + 2, j)] = s * rot[(i, j)];
        }
    }
    m
}

/// Two-mode squeezed thermal state Ω(z) V(n̄) Ωᵀ(z), equal n̄ in both modes.
pub fn two_mode_squeezed_thermal_cov(r: f64, theta: f64, n_bar: f64) -> Result<GaussianState> {
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("squeezing r = {r}")));
    }
    thermal_cov(&[n_bar, n_bar])?.transform(&two_mode_squeezer(r, theta))
}

/// Wigner function of a Gaussian state at a phase-space point.
pub fn wigner_gaussian(state: &GaussianState, point: &DVector<f64>) -> Result<f64> {
    let n = state.n_modes();
    if point.len() != 2 * n {
        return Err(Error::Dimension(format!("point of length {} for {n} modes", point.len())));
    }
    let det = state.v.determinant();
    if det.abs() < 1e-300 {
        return Err(Error::SingularCovariance);
    }
    let inv = state.v.clone().try_inverse().ok_or(Error::SingularCovariance)?;
    let x = point - &state.mean;
    let q = (x.transpose() * inv * &x)[(0, 0)];
    Ok((-0.5 * q).exp() / ((2.0 * std::f64::consts::PI).powi(n as i32) * det.sqrt()))
}

/// Single-mode phase rotation embedded at `mode`.
pub fn rotation(n: usize, mode: usize, phi: f64) -> RMat {
    let mut m = RMat::identity(2 * n, 2 * n);
    let k = 2 * mode;
    m[(k, k)] = phi.cos();
    m[(k, k + 1)] = phi.sin();
    m[(k + 1, k)] = -phi.sin();
    m[(k + 1, k + 1)] = phi.cos();
    m
}

/// Single-mode squeezer diag(e^{-r}, e^{r}) embedded at `mode`.
pub fn squeezer(n: usize, mode: usize, r: f64) -> RMat {
    let mut m = RMat::identity(2 * n, 2 * n);
    m[(2 * mode, 2 * mode)] = (-r).exp();
    m[(2 * mode + 1, 2 * mode + 1)] = r.exp();
    m
}

/// Beam splitter between modes 0 and 1 with mixing angle θ.
pub fn beam_splitter(theta: f64) -> RMat {
    let (c, s) = (theta.cos(), theta.sin());
    let mut m = RMat::zeros(4, 4);
    for i in 0..2 {
        m[(i, i)] = c;
        m[(i + 2, i + 2)] = c;
        m[(i, i + 2)] = s;
        m[(i + 2, i)] = -s;
    }
    m
}

/// Random two-mode symplectic matrix from rotations, squeezers, a beam
/// splitter and a two-mode squeezer.
pub fn random_symplectic<R: Rng>(rng: &mut R, max_r: f64) -> RMat {
    let tau = std::f64::consts::TAU;
    let mut s = RMat::identity(4, 4);
    for _ in 0..2 {
        s = rotation(2, 0, rng.random::<f64>() * tau) * s;
        s = rotation(2, 1, rng.random::<f64>() * tau) * s;
        s = squeezer(2, 0, rng.random_range(-max_r..max_r)) * s;
        s = squeezer(2, 1, rng.random_range(-max_r..max_r)) * s;
        s = beam_splitter(rng.random::<f64>() * tau) * s;
        s = two_mode_squeezer(rng.random::<f64>() * max_r, rng.random::<f64>() * tau) * s;
    }
    s
}

/// Random local symplectic S_A ⊕ S_B.
pub fn random_local_symplectic<R: Rng>(rng: &mut R, max_r: f64) -> RMat {
    let tau = std::f64::consts::TAU;
    let mut s = RMat::identity(4, 4);
    for m in 0..2 {
        s = rotation(2, m, rng.random::<f64>() * tau) * s;
        s = squeezer(2, m, rng.random_range(-max_r..max_r)) * s;
        s = rotation(2, m, rng.random::<f64>() * tau) * s;
    }
    s
}

/// Physical two-mode covariance S V_thermal Sᵀ.
pub fn random_physical_cov<R: Rng>(rng: &mut R) -> Matrix4<f64> {
    let nb = [rng.random::<f64>() * 2.0, rng.random::<f64>() * 2.0];
    let st = thermal_cov(&nb).expect("valid occupancies");
    let g = st.transform(&random_symplectic(rng, 1.0)).expect("symplectic maps preserve physicality");
    g.cov4().expect("two modes")
}

/// Λ_A = diag(1, -1, 1, 1), momentum reflection of mode A.
pub fn mirror_a() -> Matrix4<f64> {
    Matrix4::from_diagonal(&Vector4::new(1.0, -1.0, 1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn vacuum_and_thermal() {
        let v = GaussianState::vacuum(2).cov4().unwrap();
        let (p, m) = symplectic_eigenvalues_two_mode(&v).unwrap();
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(m, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(ppt_tilde_dminus(&v).unwrap(), 0.5, epsilon = 1e-12);
        assert!(simon_invariant_check(&v));
        let t = thermal_cov(&[1.0, 1.0]).unwrap().cov4().unwrap();
        let (p, m) = symplectic_eigenvalues_two_mode(&t).unwrap();
        assert_abs_diff_eq!(p, 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(m, 1.5, epsilon = 1e-12);
        assert!(ppt_tilde_dminus(&t).unwrap() >= 0.5);
        assert!(thermal_cov(&[-0.1]).is_err());
    }

    #[test]
    fn squeezed_vacuum_is_pure_and_entangled() {
        let v = two_mode_squeezed_thermal_cov(1.0, 0.3, 0.0).unwrap().cov4().unwrap();
        let (p, m) = symplectic_eigenvalues_two_mode(&v).unwrap();
        // a double root: the discriminant's rounding error enters under a square root
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-7);
        assert_abs_diff_eq!(m, 0.5, epsilon = 1e-7);
        assert!(ppt_tilde_dminus(&v).unwrap() < 0.5);
        assert_abs_diff_eq!(logneg_gaussian(&v).unwrap(), 2.0, epsilon = 1e-10);
        let v = two_mode_squeezed_thermal_cov(0.1, 0.0, 0.0).unwrap().cov4().unwrap();
        assert!(!simon_invariant_check(&v));
    }

    #[test]
    fn squeezed_thermal_block_determinants() {
        for &(r, nb) in &[(0.0, 0.3), (0.4, 0.0), (1.3, 2.5)] {
            let v = two_mode_squeezed_thermal_cov(r, 1.1, nb).unwrap().cov4().unwrap();
            let bl = TwoModeBlocks::from_cov(&v);
            let s = 1.0 + 2.0 * nb;
            assert_abs_diff_eq!(v.determinant(), s.powi(4) / 16.0, epsilon = 1e-10 * s.powi(4));
            let da = s * s * (2.0 * r).cosh().powi(2) / 4.0;
            assert_abs_diff_eq!(bl.det_a(), da, epsilon = 1e-12 * da);
            assert_abs_diff_eq!(bl.det_b(), da, epsilon = 1e-12 * da);
            if r == 0.0 {
                assert_eq!(bl.c, Matrix2::zeros());
            }
        }
    }

    #[test]
    fn logneg_threshold() {
        let nb = (1f64.exp().powi(2) - 1.0) / 2.0;
        let v = two_mode_squeezed_thermal_cov(1.0, 0.0, nb).unwrap().cov4().unwrap();
        assert_abs_diff_eq!(logneg_gaussian(&v).unwrap(), 0.0, epsilon = 1e-10);
        let v = two_mode_squeezed_thermal_cov(0.0, 0.0, 3.0).unwrap().cov4().unwrap();
        assert_eq!(logneg_gaussian(&v).unwrap(), 0.0);
    }

    #[test]
    fn non_physical_rejected() {
        assert!(matches!(GaussianState::centered(RMat::identity(4, 4) * 0.1), Err(Error::NonPhysical(_))));
        // indefinite symmetric matrix with Σ² - 4 det V = -316.9375
        #[rustfmt::skip]
        let w = Matrix4::new(
             3.0,  0.0, -2.0, -0.5,
             0.0, -2.0,  1.0, -1.0,
            -2.0,  1.0, -3.0, -2.5,
            -0.5, -1.0, -2.5,  3.0,
        );
        assert!(symplectic_eigenvalues_two_mode(&w).is_err());
    }

    #[test]
    fn wigner_examples() {
        let vac = GaussianState::vacuum(1);
        let w = wigner_gaussian(&vac, &DVector::from_vec(vec![0.0, 0.0])).unwrap();
        assert_abs_diff_eq!(w, 1.0 / std::f64::consts::PI, epsilon = 1e-14);
        let a = C64::new(0.7, -1.2);
        let coh = GaussianState::coherent(a);
        let s2 = std::f64::consts::SQRT_2;
        let peak = DVector::from_vec(vec![a.re * s2, a.im * s2]);
        let w0 = wigner_gaussian(&coh, &peak).unwrap();
        assert_abs_diff_eq!(w0, 1.0 / std::f64::consts::PI, epsilon = 1e-14);
        for d in [[0.01, 0.0], [0.0, 0.01], [-0.01, 0.0], [0.0, -0.01]] {
            let p = &peak + DVector::from_vec(d.to_vec());
            assert!(wigner_gaussian(&coh, &p).unwrap() < w0);
        }
        let sing = GaussianState { v: RMat::zeros(2, 2), mean: DVector::zeros(2) };
        assert_eq!(wigner_gaussian(&sing, &DVector::zeros(2)).unwrap_err(), Error::SingularCovariance);
    }

    #[test]
    fn wigner_marginal_is_position_density() {
        // integrate out P for a squeezed, displaced single mode
        let s = squeezer(1, 0, 0.4) * rotation(1, 0, 0.3);
        let st = GaussianState::vacuum(1).transform(&s).unwrap();
        let st = GaussianState::new(st.cov().clone(), DVector::from_vec(vec![0.3, -0.2])).unwrap();
        let x = 0.55;
        let (a, b, n) = (-12.0, 12.0, 4000);
        let h = (b - a) / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let p = a + i as f64 * h;
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * wigner_gaussian(&st, &DVector::from_vec(vec![x, p])).unwrap();
        }
        acc *= h / 3.0;
        let vx = st.cov()[(0, 0)];
        let want = (-(x - 0.3f64).powi(2) / (2.0 * vx)).exp() / (2.0 * std::f64::consts::PI * vx).sqrt();
        assert_abs_diff_eq!(acc, want, epsilon = 1e-10);
    }
}
