//! Finite-dimensional density matrices and the qubit-side entanglement
//! measures.
//!
//! Bipartite index convention: `i = i_A * d_B + i_B`, A is the slow index.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::linalg::{eigh, eigvalsh, hermitian_fn, hermiticity_error, kron, pauli, tau_dot_tau};
use crate::{CMat, Error, Result, C64};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-10;
pub const PURITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subsystem {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntropyKind {
    VonNeumann,
    Linear,
}

/// Hermitian, unit-trace, positive semidefinite matrix with an optional
/// `(d_A, d_B)` split.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: CMat,
    split: Option<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Negativity {
    /// Sum of |negative eigenvalues| of the partial transpose.
    pub n: f64,
    /// log2(2N + 1).
    pub en: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Entropies {
    /// Natural-log von Neumann entropy.
    pub vn: f64,
    /// d/(d-1) (1 - Tr ρ²); zero for d = 1.
    pub lin: f64,
    pub purity: f64,
}

impl DensityMatrix {
    /// Validates all invariants.
    pub fn new(m: CMat, split: Option<(usize, usize)>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::Dimension(format!("{}x{} is not a non-empty square", m.nrows(), m.ncols())));
        }
        if let Some((a, b)) = split {
            if a * b != m.nrows() {
                return Err(Error::Dimension(format!("split {a}x{b} vs dim {}", m.nrows())));
            }
        }
        let h = hermiticity_error(&m);
        if h > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("hermiticity error {h:e}")));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr}")));
        }
        let min = eigvalsh(&m)[0];
        if min < -PSD_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self { m, split })
    }

    /// Divides by the trace, then validates.
    pub fn normalized(m: CMat, split: Option<(usize, usize)>) -> Result<Self> {
        let tr = m.trace().re;
        if tr <= 0.0 {
            return Err(Error::InvalidState(format!("non-positive trace {tr:e}")));
        }
        let mut m = m / C64::new(tr, 0.0);
        symmetrize(&mut m);
        Self::new(m, split)
    }

    /// |ψ⟩⟨ψ| for a (not necessarily normalized) vector.
    pub fn from_pure(psi: &DVector<C64>, split: Option<(usize, usize)>) -> Result<Self> {
        let nrm = psi.norm();
        if nrm == 0.0 {
            return Err(Error::InvalidState("zero vector".into()));
        }
        let v = psi / C64::new(nrm, 0.0);
        let mut m = &v * v.adjoint();
        symmetrize(&mut m);
        Self::new(m, split)
    }

    pub fn maximally_mixed(d: usize, split: Option<(usize, usize)>) -> Result<Self> {
        Self::new(CMat::identity(d, d) / C64::new(d as f64, 0.0), split)
    }

    pub fn product(a: &DensityMatrix, b: &DensityMatrix) -> Self {
        Self { m: kron(&a.m, &b.m), split: Some((a.dim(), b.dim())) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn split(&self) -> Option<(usize, usize)> {
        self.split
    }

    pub fn with_split(mut self, da: usize, db: usize) -> Result<Self> {
        if da * db != self.dim() {
            return Err(Error::Dimension(format!("split {da}x{db} vs dim {}", self.dim())));
        }
        self.split = Some((da, db));
        Ok(self)
    }

    pub fn matrix(&self) -> &CMat {
        &self.m
    }

    pub fn into_matrix(self) -> CMat {
        self.m
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eigvalsh(&self.m)
    }

    /// Tr[ρ O].
    pub fn expect(&self, o: &CMat) -> C64 {
        (&self.m * o).trace()
    }

    pub fn purity(&self) -> f64 {
        // Tr ρ² = Σ |ρ_ij|² for Hermitian ρ
        self.m.iter().map(|z| z.norm_sqr()).sum()
    }

    /// U ρ U†.
    pub fn conjugate(&self, u: &CMat) -> Result<Self> {
        let mut m = u * &self.m * u.adjoint();
        symmetrize(&mut m);
        Self::new(m, self.split)
    }

    fn require_split(&self) -> Result<(usize, usize)> {
        self.split.ok_or(Error::SplitRequired)
    }
}

fn symmetrize(m: &mut CMat) {
    let h = (&*m + m.adjoint()) * C64::new(0.5, 0.0);
    *m = h;
}

pub fn partial_trace(rho: &DensityMatrix, keep: Subsystem) -> Result<DensityMatrix> {
    let (da, db) = rho.require_split()?;
    let m = &rho.m;
    let out = match keep {
        Subsystem::A => CMat::from_fn(da, da, |i, j| (0..db).map(|k| m[(i * db + k, j * db + k)]).sum()),
        Subsystem::B => CMat::from_fn(db, db, |i, j| (0..da).map(|k| m[(k * db + i, k * db + j)]).sum()),
    };
    Ok(DensityMatrix { m: out, split: None })
}

/// Partial transpose; Hermitian with unit trace but not necessarily PSD.
pub fn partial_transpose(rho: &DensityMatrix, on: Subsystem) -> Result<CMat> {
    let (da, db) = rho.require_split()?;
    Ok(partial_transpose_raw(&rho.m, da, db, on))
}

/// Partial transpose of any matrix with a `(da, db)` split.
pub fn partial_transpose_raw(m: &CMat, da: usize, db: usize, on: Subsystem) -> CMat {
    let n = da * db;
    CMat::from_fn(n, n, |r, c| {
        let (ia, ib) = (r / db, r % db);
        let (ja, jb) = (c / db, c % db);
        match on {
            Subsystem::A => m[(ja * db + ib, ia * db + jb)],
            Subsystem::B => m[(ia * db + jb, ja * db + ib)],
        }
    })
}

pub fn negativity(rho: &DensityMatrix) -> Result<Negativity> {
    let pt = partial_transpose(rho, Subsystem::A)?;
    let n: f64 = eigvalsh(&pt).iter().filter(|&&x| x < 0.0).map(|x| -x).sum();
    Ok(Negativity { n, en: (2.0 * n + 1.0).log2() })
}

/// 4 det ρ_A of a pure two-qubit state.
pub fn tangle(rho: &DensityMatrix) -> Result<f64> {
    if rho.require_split()? != (2, 2) {
        return Err(Error::Dimension("tangle needs a 2x2 split".into()));
    }
    let p = rho.purity();
    if p < 1.0 - PURITY_TOL {
        return Err(Error::NotPure(p));
    }
    let ra = partial_trace(rho, Subsystem::A)?;
    Ok((4.0 * ra.m.determinant().re).clamp(0.0, 1.0))
}

/// Wootters concurrence of a two-qubit state.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    if rho.dim() != 4 {
        return Err(Error::Dimension(format!("concurrence needs dim 4, got {}", rho.dim())));
    }
    let y = &pauli()[1];
    let yy = kron(y, y);
    let tilde = &yy * rho.m.conjugate() * &yy;
    let sq = hermitian_fn(&rho.m, |x| x.max(0.0).sqrt());
    let mut r = &sq * tilde * &sq;
    symmetrize(&mut r);
    let mut l: Vec<f64> = eigvalsh(&r).iter().map(|x| x.max(0.0).sqrt()).collect();
    l.sort_by(|a, b| b.total_cmp(a));
    Ok((l[0] - l[1] - l[2] - l[3]).max(0.0))
}

/// Concurrence of an SU(2)-invariant two-qubit state from c = ⟨τ_a·τ_b⟩.
pub fn concurrence_from_correlator(c: f64) -> f64 {
    (c.abs() / 3.0 - c / 6.0 - 0.5).max(0.0)
}

pub fn entropies(rho: &DensityMatrix) -> Entropies {
    entropies_from_spectrum(&rho.eigenvalues(), rho.dim())
}

pub(crate) fn entropies_from_spectrum(ev: &[f64], d: usize) -> Entropies {
    let mut vn = 0.0;
    let mut purity = 0.0;
    for &p in ev {
        // values in [-PSD_TOL, 0] are rounding noise
        let p = p.max(0.0);
        if p > 0.0 {
            vn -= p * p.ln();
        }
        purity += p * p;
    }
    let lin = if d > 1 { d as f64 / (d as f64 - 1.0) * (1.0 - purity) } else { 0.0 };
    Entropies { vn, lin, purity }
}

/// (S_A + S_B - S_AB) / (S_A + S_B).
pub fn normalized_mutual_info(rho: &DensityMatrix, kind: EntropyKind) -> Result<f64> {
    let pick = |e: Entropies| match kind {
        EntropyKind::VonNeumann => e.vn,
        EntropyKind::Linear => e.lin,
    };
    let sa = pick(entropies(&partial_trace(rho, Subsystem::A)?));
    let sb = pick(entropies(&partial_trace(rho, Subsystem::B)?));
    let sab = pick(entropies(rho));
    let den = sa + sb;
    if den.abs() < 1e-12 {
        return Err(Error::UndefinedMutualInfo(den));
    }
    Ok((den - sab) / den)
}

/// Rotationally invariant two-qubit state (1 + f τ_a·τ_b)/4, f ∈ [-1, 1/3].
pub fn werner_state(f: f64) -> Result<DensityMatrix> {
    if !(-1.0..=1.0 / 3.0).contains(&f) {
        return Err(Error::Domain(format!("Werner parameter f = {f} outside [-1, 1/3]")));
    }
    let m = (CMat::identity(4, 4) + tau_dot_tau() * C64::new(f, 0.0)) * C64::new(0.25, 0.0);
    DensityMatrix::new(m, Some((2, 2)))
}

/// exp(-βH)/Tr exp(-βH).
pub fn thermal_state(h: &CMat, beta: f64, split: Option<(usize, usize)>) -> Result<DensityMatrix> {
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::Domain(format!("beta = {beta}")));
    }
    if hermiticity_error(h) > HERMITIAN_TOL * h.norm().max(1.0) {
        return Err(Error::InvalidState("Hamiltonian is not Hermitian".into()));
    }
    let (w, u) = eigh(h);
    let e0 = w[0];
    let wts: Vec<f64> = w.iter().map(|e| (-beta * (e - e0)).exp()).collect();
    let z: f64 = wts.iter().sum();
    let d = CMat::from_diagonal(&DVector::from_iterator(wts.len(), wts.iter().map(|x| C64::new(x / z, 0.0))));
    let mut m = &u * d * u.adjoint();
    symmetrize(&mut m);
    DensityMatrix::new(m, split)
}
