//! Exact diagonalization of small spin-1/2 lattices with two probe spins.
//!
//! Bath spins carry S = σ/2 and the probes are written with Pauli matrices τ,
//! so the Hamiltonian reads
//!
//! H = J Σ_⟨ij⟩ S_i·S_j + αJ (S_A·τ_a + S_B·τ_b).
//!
//! Basis states are bit strings: bath sites occupy bits 0..N_b-1, probe a is
//! bit N_b and probe b is bit N_b+1 (bit set = spin up). The Hamiltonian
//! conserves the number of up spins, so everything is done per S_z block.
//! Blocks with more up than down spins are spin-flip images of their
//! partners and are not diagonalized separately.

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::lde::{bisect_beta, critical_temperature, fit_canonical_params, temperature_grid, CanonicalParams, SampleKind};
use crate::linalg::eigh_real;
use crate::sample::rng;
use crate::{Error, Result, RMat};

/// Hard cap on bath + probe spins.
pub const MAX_SPINS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LatticeKind {
    Chain,
    Ladder,
}

/// l × n_c bath (open boundaries) with two probes attached to bath sites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub kind: LatticeKind,
    /// Sites along a leg.
    pub l: usize,
    /// Bath exchange J.
    pub j: f64,
    /// Probe coupling in units of J.
    pub alpha: f64,
    /// Bath sites (A, B) carrying the probes.
    pub probes: (usize, usize),
}

/// w S_i·S_j with S = σ/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

impl LatticeSpec {
    /// Open chain of `l` sites with probes on its two ends.
    pub fn chain(l: usize, alpha: f64) -> Result<Self> {
        Self { kind: LatticeKind::Chain, l, j: 1.0, alpha, probes: (0, l.saturating_sub(1)) }.validated()
    }

    /// Two-leg ladder; probes on opposite ends of the first leg.
    pub fn ladder(l: usize, alpha: f64) -> Result<Self> {
        Self { kind: LatticeKind::Ladder, l, j: 1.0, alpha, probes: (0, 2 * l.saturating_sub(1)) }.validated()
    }

    pub fn with_probes(self, a: usize, b: usize) -> Result<Self> {
        Self { probes: (a, b), ..self }.validated()
    }

    pub fn with_alpha(self, alpha: f64) -> Result<Self> {
        Self { alpha, ..self }.validated()
    }

    pub fn with_j(self, j: f64) -> Result<Self> {
        Self { j, ..self }.validated()
    }

    pub fn legs(&self) -> usize {
        match self.kind {
            LatticeKind::Chain => 1,
            LatticeKind::Ladder => 2,
        }
    }

    pub fn n_bath(&self) -> usize {
        self.l * self.legs()
    }

    pub fn n_total(&self) -> usize {
        self.n_bath() + 2
    }

    /// Bit index of probe a; probe b follows.
    pub fn probe_bits(&self) -> (usize, usize) {
        (self.n_bath(), self.n_bath() + 1)
    }

    fn validated(self) -> Result<Self> {
        if self.l < 2 {
            return Err(Error::Domain(format!("lattice length {} < 2", self.l)));
        }
        if self.n_total() > MAX_SPINS {
            return Err(Error::Resource(format!("{} spins exceed the cap of {MAX_SPINS}", self.n_total())));
        }
        let nb = self.n_bath();
        if self.probes.0 >= nb || self.probes.1 >= nb {
            return Err(Error::Domain(format!("probe sites {:?} outside bath of {nb}", self.probes)));
        }
        if !self.alpha.is_finite() || !(self.j > 0.0) {
            return Err(Error::Domain(format!("J = {}, alpha = {}", self.j, self.alpha)));
        }
        Ok(self)
    }

    /// Leg-major site index: site (x, leg) ↦ x·n_c + leg.
    pub fn bath_bonds(&self) -> Vec<Bond> {
        let nc = self.legs();
        let mut out = Vec::new();
        for x in 0..self.l {
            for c in 0..nc {
                let s = x * nc + c;
                if x + 1 < self.l {
                    out.push(Bond { i: s, j: s + nc, w: self.j });
                }
                if c + 1 < nc {
                    out.push(Bond { i: s, j: s + 1, w: self.j });
                }
            }
        }
        out
    }

    /// Bath bonds plus the two probe couplings αJ S·τ = 2αJ S·s.
    pub fn bonds(&self) -> Vec<Bond> {
        let mut b = self.bath_bonds();
        let (pa, pb) = self.probe_bits();
        if self.alpha != 0.0 {
            b.push(Bond { i: self.probes.0, j: pa, w: 2.0 * self.alpha * self.j });
            b.push(Bond { i: self.probes.1, j: pb, w: 2.0 * self.alpha * self.j });
        }
        b
    }
}

/// Basis of the sector with a fixed number of up spins, sorted ascending.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    pub n_sites: usize,
    pub n_up: usize,
    pub states: Vec<u32>,
}

impl SectorBasis {
    pub fn new(n_sites: usize, n_up: usize) -> Self {
        let states = (0u32..1 << n_sites).filter(|s| s.count_ones() as usize == n_up).collect();
        Self { n_sites, n_up, states }
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn index(&self, state: u32) -> Option<usize> {
        self.states.binary_search(&state).ok()
    }

    /// ⟨S_i^z⟩ on each basis state.
    pub fn sz(&self, site: usize) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.states.iter().map(|s| if s >> site & 1 == 1 { 0.5 } else { -0.5 }))
    }
}

/// Real symmetric matrix in compressed-row form.
#[derive(Debug, Clone)]
pub struct SparseSym {
    pub dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SparseSym {
    /// Σ w S_i·S_j (+ `shift`·1) restricted to one sector.
    pub fn heisenberg(basis: &SectorBasis, bonds: &[Bond], shift: f64) -> Self {
        let dim = basis.dim();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        let mut row: Vec<(u32, f64)> = Vec::new();
        for (r, &s) in basis.states.iter().enumerate() {
            row.clear();
            let mut diag = shift;
            for b in bonds {
                let (ui, uj) = (s >> b.i & 1, s >> b.j & 1);
                if ui == uj {
                    diag += 0.25 * b.w;
                } else {
                    diag -= 0.25 * b.w;
                    let t = s ^ (1 << b.i) ^ (1 << b.j);
                    let c = basis.index(t).expect("flip stays in sector");
                    row.push((c as u32, 0.5 * b.w));
                }
            }
            row.push((r as u32, diag));
            row.sort_unstable_by_key(|e| e.0);
            let mut last: Option<u32> = None;
            for &(c, v) in row.iter() {
                if last == Some(c) {
                    *vals.last_mut().expect("entry exists") += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { dim, row_ptr, cols, vals }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.dim);
        self.matvec_into(x.as_slice(), y.as_mut_slice());
        y
    }

    fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        let kernel = |(r, out): (usize, &mut f64)| {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            *out = acc;
        };
        if self.dim >= 8192 {
            y.par_iter_mut().enumerate().for_each(kernel);
        } else {
            y.iter_mut().enumerate().for_each(kernel);
        }
    }

    pub fn to_dense(&self) -> RMat {
        let mut m = RMat::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[k] as usize)] += self.vals[k];
            }
        }
        m
    }

    /// ⟨v|M|v⟩.
    pub fn expect(&self, v: &[f64]) -> f64 {
        let mut acc = 0.0;
        for r in 0..self.dim {
            let mut row = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                row += self.vals[k] * v[self.cols[k] as usize];
            }
            acc += v[r] * row;
        }
        acc
    }
}

/// One S_z block of the Hamiltonian.
#[derive(Debug, Clone)]
pub struct HamiltonianBlock {
    pub basis: SectorBasis,
    pub h: SparseSym,
    /// 2 if the spin-flipped block is implied, else 1.
    pub multiplicity: usize,
}

/// Hamiltonian split into the independent blocks with n_up ≤ N/2.
#[derive(Debug, Clone)]
pub struct BlockedHamiltonian {
    pub n_sites: usize,
    pub bonds: Vec<Bond>,
    pub blocks: Vec<HamiltonianBlock>,
}

impl BlockedHamiltonian {
    pub fn new(n_sites: usize, bonds: Vec<Bond>) -> Result<Self> {
        if n_sites > MAX_SPINS {
            return Err(Error::Resource(format!("{n_sites} spins exceed the cap of {MAX_SPINS}")));
        }
        let blocks = (0..=n_sites / 2)
            .into_par_iter()
            .map(|n_up| {
                let basis = SectorBasis::new(n_sites, n_up);
                let h = SparseSym::heisenberg(&basis, &bonds, 0.0);
                let multiplicity = if 2 * n_up == n_sites { 1 } else { 2 };
                HamiltonianBlock { basis, h, multiplicity }
            })
            .collect();
        Ok(Self { n_sites, bonds, blocks })
    }

    pub fn block(&self, n_up: usize) -> &HamiltonianBlock {
        let k = n_up.min(self.n_sites - n_up);
        &self.blocks[k]
    }

    /// Σ multiplicity·dim = 2^N.
    pub fn total_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.multiplicity * b.basis.dim()).sum()
    }
}

pub fn build_hamiltonian(spec: &LatticeSpec) -> Result<BlockedHamiltonian> {
    BlockedHamiltonian::new(spec.n_total(), spec.bonds())
}

/// The full 2^N × 2^N Hamiltonian assembled from Kronecker products of
/// single-site operators, independent of the sector machinery.
pub fn dense_hamiltonian(n_sites: usize, bonds: &[Bond]) -> Result<RMat> {
    if n_sites > 12 {
        return Err(Error::Resource(format!("dense Hamiltonian of {n_sites} spins")));
    }
    let sp = RMat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let sm = sp.transpose();
    let sz = RMat::from_row_slice(2, 2, &[0.5, 0.0, 0.0, -0.5]);
    // bit k is the k-th least significant, so site k sits at kron position N-1-k
    let site_op = |o: &RMat, site: usize| {
        let mut m = RMat::identity(1, 1);
        for pos in (0..n_sites).rev() {
            m = if pos == site { m.kronecker(o) } else { m.kronecker(&RMat::identity(2, 2)) };
        }
        m
    };
    let dim = 1 << n_sites;
    let mut h = RMat::zeros(dim, dim);
    for b in bonds {
        let (pi, mi, zi) = (site_op(&sp, b.i), site_op(&sm, b.i), site_op(&sz, b.i));
        let (pj, mj, zj) = (site_op(&sp, b.j), site_op(&sm, b.j), site_op(&sz, b.j));
        h += ((&pi * &mj + &mi * &pj) * 0.5 + &zi * &zj) * b.w;
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Largest block handled by the dense eigensolver.
    pub dense_limit: usize,
    /// Levels per block from the iterative solver.
    pub n_low: usize,
    /// Residual tolerance of the iterative solver.
    pub tol: f64,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { dense_limit: 4096, n_low: 8, tol: 1e-10, seed: 7 }
    }
}

/// Eigenpairs of one block, ascending.
#[derive(Debug, Clone)]
pub struct BlockSpectrum {
    pub n_up: usize,
    pub dim: usize,
    pub multiplicity: usize,
    pub values: Vec<f64>,
    /// Columns are eigenvectors.
    pub vectors: RMat,
}

impl BlockSpectrum {
    pub fn complete(&self) -> bool {
        self.values.len() == self.dim
    }
}

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub blocks: Vec<BlockSpectrum>,
    pub e0: f64,
}

impl SpectrumResult {
    pub fn complete(&self) -> bool {
        self.blocks.iter().all(|b| b.complete())
    }

    /// All levels with their degeneracy from the flipped blocks.
    pub fn levels(&self) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize)> = self
            .blocks
            .iter()
            .flat_map(|b| b.values.iter().map(move |&e| (e, b.multiplicity)))
            .collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }
}

pub fn solve_spectrum(h: &BlockedHamiltonian, opts: &SolverOptions) -> Result<SpectrumResult> {
    let blocks = h
        .blocks
        .par_iter()
        .map(|b| {
            let dim = b.basis.dim();
            let (values, vectors) = if dim <= opts.dense_limit {
                let (w, v) = eigh_real(&b.h.to_dense());
                (w.iter().copied().collect(), v)
            } else {
                lanczos_lowest(&b.h, opts.n_low.min(dim), opts.tol, opts.seed ^ b.basis.n_up as u64)?
            };
            Ok(BlockSpectrum { n_up: b.basis.n_up, dim, multiplicity: b.multiplicity, values, vectors })
        })
        .collect::<Result<Vec<_>>>()?;
    let e0 = blocks.iter().filter_map(|b| b.values.first().copied()).fold(f64::INFINITY, f64::min);
    Ok(SpectrumResult { blocks, e0 })
}

fn orthogonalize(w: &mut DVector<f64>, against: &[DVector<f64>]) {
    for _ in 0..2 {
        for q in against {
            let c = q.dot(w);
            w.axpy(-c, q, 1.0);
        }
    }
}

/// Lowest `k` eigenpairs of a sparse symmetric matrix by Lanczos with full
/// reorthogonalization, one converged vector at a time; converged vectors
/// are locked and projected out of later Krylov spaces.
pub fn lanczos_lowest(h: &SparseSym, k: usize, tol: f64, seed: u64) -> Result<(Vec<f64>, RMat)> {
    let n = h.dim;
    let mut r = rng(seed);
    let mut locked: Vec<DVector<f64>> = Vec::new();
    let mut values = Vec::new();
    let max_restarts = 100;
    while locked.len() < k.min(n) {
        let mut start = DVector::from_fn(n, |_, _| r.random::<f64>() - 0.5);
        orthogonalize(&mut start, &locked);
        let mut done = false;
        for _ in 0..max_restarts {
            start /= start.norm();
            let m_max = (n - locked.len()).min(240);
            let mut basis: Vec<DVector<f64>> = vec![start.clone()];
            let mut alphas: Vec<f64> = Vec::new();
            let mut betas: Vec<f64> = Vec::new();
            let mut ritz = None;
            for step in 0..m_max {
                let mut w = h.matvec(&basis[step]);
                let a = basis[step].dot(&w);
                alphas.push(a);
                orthogonalize(&mut w, &locked);
                orthogonalize(&mut w, &basis);
                let b = w.norm();
                let m = alphas.len();
                let check = b < 1e-12 || step + 1 == m_max || m % 8 == 0;
                if check {
                    let mut t = RMat::zeros(m, m);
                    for i in 0..m {
                        t[(i, i)] = alphas[i];
                        if i + 1 < m {
                            t[(i, i + 1)] = betas[i];
                            t[(i + 1, i)] = betas[i];
                        }
                    }
                    let (theta, s) = eigh_real(&t);
                    let resid = b * s[(m - 1, 0)].abs();
                    let mut vec = DVector::zeros(n);
                    for (i, q) in basis.iter().enumerate() {
                        vec.axpy(s[(i, 0)], q, 1.0);
                    }
                    let converged = resid <= tol * theta[0].abs().max(1.0) || b < 1e-12;
                    ritz = Some((theta[0], vec));
                    if converged {
                        done = true;
                        break;
                    }
                }
                if b < 1e-12 {
                    break;
                }
                betas.push(b);
                basis.push(w / b);
            }
            let (theta, mut vec) = ritz.expect("at least one Ritz check");
            orthogonalize(&mut vec, &locked);
            vec /= vec.norm();
            if done {
                values.push(theta);
                locked.push(vec);
                break;
            }
            start = vec;
        }
        if !done {
            return Err(Error::Resource(format!("Lanczos did not converge after {max_restarts} restarts")));
        }
    }
    // locking may deliver a near-degenerate pair out of order
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let vals = order.iter().map(|&i| values[i]).collect();
    let vecs = RMat::from_columns(&order.iter().map(|&i| locked[i].clone()).collect::<Vec<_>>());
    Ok((vals, vecs))
}

/// Singlet-triplet splitting of the probe sector and the gap above it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowSpectrum {
    pub e_singlet: f64,
    pub e_triplet: f64,
    /// E_triplet - E_singlet.
    pub j_can: f64,
    /// Distance from the top of the singlet+triplet sector to the next level.
    pub gap: f64,
}

impl LowSpectrum {
    /// Gap larger than five times the splitting.
    pub fn robust(&self) -> bool {
        self.gap > 5.0 * self.j_can.abs()
    }
}

const LEVEL_TOL: f64 = 1e-9;

fn total_s2(basis: &SectorBasis) -> SparseSym {
    let n = basis.n_sites;
    let mut bonds = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            bonds.push(Bond { i, j, w: 2.0 });
        }
    }
    SparseSym::heisenberg(basis, &bonds, 0.75 * n as f64)
}

pub fn low_spectrum_jcan(spec: &LatticeSpec, opts: &SolverOptions) -> Result<LowSpectrum> {
    let n = spec.n_total();
    if n % 2 == 1 {
        return Err(Error::Domain(format!("{n} spins: no singlet sector")));
    }
    let h = build_hamiltonian(spec)?;
    let low = SolverOptions { n_low: opts.n_low.max(3), ..*opts };
    let s0 = solve_block(h.block(n / 2), &low)?;
    let s1 = solve_block(h.block(n / 2 + 1), &low)?;
    if s0.values.len() < 3 || s1.values.is_empty() {
        return Err(Error::SectorAmbiguity("too few levels".into()));
    }
    let e_t = s1.values[0];
    if spec.alpha == 0.0 {
        // decoupled probes: the four probe states are degenerate
        let gap = s0.values.get(4).map_or(f64::INFINITY, |e| e - s0.values[0]);
        return Ok(LowSpectrum { e_singlet: s0.values[0], e_triplet: s0.values[0], j_can: 0.0, gap });
    }
    // the two lowest S_z = 0 levels are the singlet and the triplet's m = 0 member
    let (ia, ib) = if (s0.values[0] - e_t).abs() <= (s0.values[1] - e_t).abs() { (1, 0) } else { (0, 1) };
    let e_s = s0.values[ia];
    if (s0.values[ib] - e_t).abs() > 1e-7 * e_t.abs().max(1.0) {
        return Err(Error::SectorAmbiguity(format!("no triplet partner in S_z = 0 (E_t = {e_t}, levels {:?})", &s0.values[..2])));
    }
    let top = e_s.max(e_t);
    let gap = s0.values[2] - top;
    if gap < LEVEL_TOL || (e_s - e_t).abs() < LEVEL_TOL {
        return Err(Error::SectorAmbiguity(format!("low sector is not 1+3 dimensional (gap {gap:e})")));
    }
    let s2 = total_s2(&h.block(n / 2).basis);
    let s_sing = s2.expect(s0.vectors.column(ia).as_slice());
    let s_trip = s2.expect(s0.vectors.column(ib).as_slice());
    if s_sing.abs() > 1e-6 || (s_trip - 2.0).abs() > 1e-6 {
        return Err(Error::SectorAmbiguity(format!("S² = {s_sing} and {s_trip} instead of 0 and 2")));
    }
    Ok(LowSpectrum { e_singlet: e_s, e_triplet: e_t, j_can: e_t - e_s, gap })
}

fn solve_block(b: &HamiltonianBlock, opts: &SolverOptions) -> Result<BlockSpectrum> {
    let dim = b.basis.dim();
    let (values, vectors) = if dim <= opts.dense_limit {
        let (w, v) = eigh_real(&b.h.to_dense());
        (w.iter().copied().collect(), v)
    } else {
        lanczos_lowest(&b.h, opts.n_low.min(dim), opts.tol, opts.seed ^ b.basis.n_up as u64)?
    };
    Ok(BlockSpectrum { n_up: b.basis.n_up, dim, multiplicity: b.multiplicity, values, vectors })
}

/// Energies and probe correlators ⟨τ_a·τ_b⟩ of every computed level.
#[derive(Debug, Clone)]
pub struct ThermalLevels {
    e0: f64,
    /// (E - E0, ⟨τ_a·τ_b⟩, degeneracy).
    levels: Vec<(f64, f64, usize)>,
    /// Per block: (lowest unresolved energy bound, missing states).
    tails: Vec<(f64, usize)>,
}

pub const THERMAL_TAIL_TOL: f64 = 1e-10;

impl ThermalLevels {
    pub fn new(spec: &LatticeSpec, opts: &SolverOptions) -> Result<Self> {
        let h = build_hamiltonian(spec)?;
        let spectrum = solve_spectrum(&h, opts)?;
        let (pa, pb) = spec.probe_bits();
        let per_block: Vec<(Vec<(f64, f64, usize)>, Option<(f64, usize)>)> = h
            .blocks
            .par_iter()
            .zip(spectrum.blocks.par_iter())
            .map(|(hb, sb)| {
                let tt = SparseSym::heisenberg(&hb.basis, &[Bond { i: pa, j: pb, w: 4.0 }], 0.0);
                let lv = sb
                    .values
                    .iter()
                    .enumerate()
                    .map(|(k, &e)| (e - spectrum.e0, tt.expect(sb.vectors.column(k).as_slice()), sb.multiplicity))
                    .collect();
                let tail = (!sb.complete())
                    .then(|| (sb.values.last().copied().unwrap_or(spectrum.e0) - spectrum.e0, sb.multiplicity * (sb.dim - sb.values.len())));
                (lv, tail)
            })
            .collect();
        let mut levels = Vec::new();
        let mut tails = Vec::new();
        for (lv, t) in per_block {
            levels.extend(lv);
            tails.extend(t);
        }
        levels.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self { e0: spectrum.e0, levels, tails })
    }

    pub fn ground_energy(&self) -> f64 {
        self.e0
    }

    fn weight(beta: f64, de: f64) -> f64 {
        if de <= 0.0 {
            1.0
        } else {
            (-beta * de).exp()
        }
    }

    /// ⟨τ_a·τ_b⟩ at inverse temperature β (β = ∞ allowed) and the bound on
    /// the Boltzmann weight missed by a truncated spectrum.
    pub fn correlator_with_tail(&self, beta: f64) -> (f64, f64) {
        let mut z = 0.0;
        let mut acc = 0.0;
        for &(de, tt, g) in &self.levels {
            let w = g as f64 * Self::weight(beta, de);
            z += w;
            acc += w * tt;
        }
        let tail: f64 = self.tails.iter().map(|&(de, n)| n as f64 * Self::weight(beta, de)).sum();
        (acc / z, tail / z)
    }

    pub fn correlator(&self, beta: f64) -> Result<f64> {
        let (c, tail) = self.correlator_with_tail(beta);
        if tail > THERMAL_TAIL_TOL {
            return Err(Error::ThermalTail(tail));
        }
        Ok(c)
    }

    /// Correlator at T = 0, averaged over a degenerate ground manifold.
    pub fn ground_correlator(&self) -> f64 {
        let (mut z, mut acc) = (0.0, 0.0);
        for &(de, tt, g) in &self.levels {
            if de <= LEVEL_TOL {
                z += g as f64;
                acc += g as f64 * tt;
            }
        }
        acc / z
    }

    /// Temperature where the correlator crosses -1 (probes stop being
    /// entangled); None if it never does.
    pub fn critical_temperature(&self, beta_scale: f64) -> Result<Option<f64>> {
        let root = bisect_beta(|b| self.correlator_with_tail(b).0 + 1.0, beta_scale)?;
        if let Some(b) = root {
            self.correlator(b)?;
        }
        Ok(root.map(|b| 1.0 / b))
    }
}

/// ⟨τ_a·τ_b⟩(β) = Tr[e^{-βH} τ_a·τ_b]/Tr e^{-βH}, block by block.
pub fn thermal_correlator_exact(spec: &LatticeSpec, betas: &[f64], opts: &SolverOptions) -> Result<Vec<f64>> {
    let t = ThermalLevels::new(spec, opts)?;
    betas.iter().map(|&b| t.correlator(b)).collect()
}

/// Same quantity from one diagonalization of the full Hilbert space.
pub fn thermal_correlator_dense(spec: &LatticeSpec, betas: &[f64]) -> Result<Vec<f64>> {
    let n = spec.n_total();
    let h = dense_hamiltonian(n, &spec.bonds())?;
    let (pa, pb) = spec.probe_bits();
    let tt = dense_hamiltonian(n, &[Bond { i: pa, j: pb, w: 4.0 }])?;
    let (e, u) = eigh_real(&h);
    let diag = (u.transpose() * tt * &u).diagonal();
    let e0 = e[0];
    Ok(betas
        .iter()
        .map(|&b| {
            let (mut z, mut acc) = (0.0, 0.0);
            for k in 0..e.len() {
                let w = ThermalLevels::weight(b, e[k] - e0);
                z += w;
                acc += w * diag[k];
            }
            acc / z
        })
        .collect())
}

/// Static response of the bath between the probe sites and the
/// second-order singlet-delocalization rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BathResponse {
    /// χ = -Σ_{k>0} 2⟨0|S_A^z|k⟩⟨k|S_B^z|0⟩/(E_k - E_0).
    pub chi: f64,
    /// Φ/α² = (2J)² Σ_{k>0} |⟨0|S_A^z - S_B^z|k⟩|²/(E_k - E_0)².
    pub phi_per_alpha2: f64,
    /// Bath gap E_1 - E_0 inside the S_z = 0 sector.
    pub gap: f64,
}

impl BathResponse {
    /// Perturbative singlet-triplet splitting 4(Jα)²χ.
    pub fn j_can(&self, j: f64, alpha: f64) -> f64 {
        4.0 * (j * alpha).powi(2) * self.chi
    }
}

/// Bath S_z = 0 block and its full eigendecomposition.
pub fn bath_eigensystem(spec: &LatticeSpec) -> Result<(SectorBasis, DVector<f64>, RMat)> {
    let nb = spec.n_bath();
    if nb % 2 == 1 {
        return Err(Error::Domain(format!("odd bath of {nb} spins has a degenerate ground state")));
    }
    let basis = SectorBasis::new(nb, nb / 2);
    if basis.dim() > 4096 {
        return Err(Error::Resource(format!("bath block of dimension {}", basis.dim())));
    }
    let h = SparseSym::heisenberg(&basis, &spec.bath_bonds(), 0.0);
    let (e, u) = eigh_real(&h.to_dense());
    Ok((basis, e, u))
}

pub fn chi_lehman_and_phi(spec: &LatticeSpec) -> Result<BathResponse> {
    let (basis, e, u) = bath_eigensystem(spec)?;
    let gap = e[1] - e[0];
    if gap < LEVEL_TOL {
        return Err(Error::DegenerateGroundState(gap));
    }
    let g = u.column(0);
    let sa = basis.sz(spec.probes.0).component_mul(&g);
    let sb = basis.sz(spec.probes.1).component_mul(&g);
    let ma = u.transpose() * sa;
    let mb = u.transpose() * sb;
    let (mut chi, mut phi) = (0.0, 0.0);
    for k in 1..e.len() {
        let de = e[k] - e[0];
        chi -= 2.0 * ma[k] * mb[k] / de;
        phi += (ma[k] - mb[k]).powi(2) / (de * de);
    }
    Ok(BathResponse { chi, phi_per_alpha2: 4.0 * spec.j * spec.j * phi, gap })
}

/// Comparison of the ED results with the perturbative and canonical models.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub spec: LatticeSpec,
    pub low: LowSpectrum,
    pub robust_gap: bool,
    pub bath: BathResponse,
    /// 4(Jα)²χ.
    pub j_can_predicted: f64,
    /// |J_can - 4(Jα)²χ|/J_can.
    pub j_can_rel_error: f64,
    /// α²·Φ/α² from perturbation theory.
    pub phi_predicted: f64,
    pub temperatures: Vec<f64>,
    pub correlators: Vec<f64>,
    pub fit: CanonicalParams,
    pub fit_rms: f64,
    pub fit_iterations: usize,
    pub t0_correlator: f64,
    /// -3 + η + 3Φ with the fitted parameters.
    pub t0_canonical: f64,
    pub t_star: Option<f64>,
    /// 0.93 J_can(1 - Φ) with the fitted parameters.
    pub t_star_estimate: f64,
    /// Exact root of the fitted canonical correlator.
    pub t_star_canonical: Option<f64>,
}

impl ConsistencyReport {
    pub fn t_star_ratio(&self) -> Option<f64> {
        self.t_star.map(|t| t / self.t_star_estimate)
    }
}

/// ED spectrum, bath response, canonical fit over the standard twelve
/// temperatures and the critical temperature, side by side.
pub fn theory_consistency_report(spec: &LatticeSpec, opts: &SolverOptions) -> Result<ConsistencyReport> {
    if !(spec.alpha > 0.0) {
        return Err(Error::Domain(format!("alpha = {} must be positive", spec.alpha)));
    }
    let low = low_spectrum_jcan(spec, opts)?;
    let bath = chi_lehman_and_phi(spec)?;
    let thermal = ThermalLevels::new(spec, opts)?;
    let temperatures = temperature_grid(low.j_can, 12);
    let correlators = temperatures.iter().map(|t| thermal.correlator(1.0 / t)).collect::<Result<Vec<_>>>()?;
    let samples: Vec<(f64, f64)> = temperatures.iter().zip(&correlators).map(|(t, &c)| (1.0 / t, c)).collect();
    let fit = fit_canonical_params(&samples, SampleKind::Correlator)?;
    let p = fit.params;
    let j_can_predicted = bath.j_can(spec.j, spec.alpha);
    Ok(ConsistencyReport {
        spec: *spec,
        low,
        robust_gap: low.robust(),
        bath,
        j_can_predicted,
        j_can_rel_error: (low.j_can - j_can_predicted).abs() / low.j_can.abs(),
        phi_predicted: spec.alpha * spec.alpha * bath.phi_per_alpha2,
        temperatures,
        correlators,
        fit: p,
        fit_rms: fit.rms,
        fit_iterations: fit.iterations,
        t0_correlator: thermal.ground_correlator(),
        t0_canonical: p.zero_temperature_correlator(),
        t_star: thermal.critical_temperature(1.0 / low.j_can)?,
        t_star_estimate: 0.93 * p.j_can * (1.0 - p.phi),
        t_star_canonical: critical_temperature(&p)?.kt_star,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_site_bond() {
        let h = BlockedHamiltonian::new(2, vec![Bond { i: 0, j: 1, w: 1.0 }]).unwrap();
        let s = solve_spectrum(&h, &SolverOptions::default()).unwrap();
        let lv = s.levels();
        assert_abs_diff_eq!(lv[0].0, -0.75, epsilon = 1e-14);
        assert_eq!(lv[0].1, 1);
        let triplet: usize = lv[1..].iter().map(|l| l.1).sum();
        assert_eq!(triplet, 3);
        for l in &lv[1..] {
            assert_abs_diff_eq!(l.0, 0.25, epsilon = 1e-14);
        }
    }

    #[test]
    fn blocks_match_dense() {
        let spec = LatticeSpec::chain(6, 0.3).unwrap();
        let h = build_hamiltonian(&spec).unwrap();
        assert_eq!(h.total_dim(), 256);
        let s = solve_spectrum(&h, &SolverOptions::default()).unwrap();
        let mut blocked: Vec<f64> = s.levels().iter().flat_map(|&(e, g)| std::iter::repeat(e).take(g)).collect();
        blocked.sort_by(f64::total_cmp);
        let (dense, _) = eigh_real(&dense_hamiltonian(8, &spec.bonds()).unwrap());
        for (a, b) in blocked.iter().zip(dense.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn ladder_bonds() {
        let spec = LatticeSpec::ladder(3, 0.1).unwrap();
        assert_eq!(spec.n_bath(), 6);
        // 2 legs × 2 + 3 rungs
        assert_eq!(spec.bath_bonds().len(), 7);
        assert_eq!(spec.probes, (0, 4));
        assert!(LatticeSpec::ladder(8, 0.1).is_err());
        assert!(LatticeSpec::chain(15, 0.1).is_err());
        assert!(LatticeSpec::chain(4, 0.1).unwrap().with_probes(0, 4).is_err());
    }

    #[test]
    fn lanczos_matches_dense() {
        let spec = LatticeSpec::chain(10, 0.2).unwrap();
        let h = build_hamiltonian(&spec).unwrap();
        let b = h.block(6);
        let (ld, _) = lanczos_lowest(&b.h, 6, 1e-10, 3).unwrap();
        let (dd, _) = eigh_real(&b.h.to_dense());
        for k in 0..6 {
            assert_abs_diff_eq!(ld[k], dd[k], epsilon = 1e-9);
        }
    }

    #[test]
    fn sz_conservation() {
        // the dense operator never connects different magnetizations
        let spec = LatticeSpec::chain(4, 0.4).unwrap();
        let h = dense_hamiltonian(6, &spec.bonds()).unwrap();
        for r in 0..64u32 {
            for c in 0..64u32 {
                if r.count_ones() != c.count_ones() {
                    assert_eq!(h[(r as usize, c as usize)], 0.0);
                }
            }
        }
    }

    #[test]
    fn singlet_triplet_small_chain() {
        let spec = LatticeSpec::chain(4, 0.1).unwrap();
        let low = low_spectrum_jcan(&spec, &SolverOptions::default()).unwrap();
        assert!(low.j_can > 0.0);
        assert!(low.robust());
        let zero = low_spectrum_jcan(&spec.with_alpha(0.0).unwrap(), &SolverOptions::default()).unwrap();
        assert_eq!(zero.j_can, 0.0);
    }

    #[test]
    fn thermal_dense_vs_blocked() {
        let spec = LatticeSpec::chain(6, 0.3).unwrap();
        let betas = [0.0, 0.5, 2.0, 10.0, 60.0];
        let a = thermal_correlator_exact(&spec, &betas, &SolverOptions::default()).unwrap();
        let b = thermal_correlator_dense(&spec, &betas).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(a[0], 0.0, epsilon = 1e-14);
        let zero = thermal_correlator_exact(&spec.with_alpha(0.0).unwrap(), &betas, &SolverOptions::default()).unwrap();
        for c in zero {
            assert_abs_diff_eq!(c, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn truncated_tail_detected() {
        let spec = LatticeSpec::chain(8, 0.1).unwrap();
        let opts = SolverOptions { dense_limit: 100, n_low: 4, ..Default::default() };
        let t = ThermalLevels::new(&spec, &opts).unwrap();
        assert!(matches!(t.correlator(1.0), Err(Error::ThermalTail(_))));
        let full = ThermalLevels::new(&spec, &SolverOptions::default()).unwrap();
        assert_abs_diff_eq!(t.correlator(2000.0).unwrap(), full.correlator(2000.0).unwrap(), epsilon = 1e-9);
    }

    #[test]
    fn chi_resolvent_oracle() {
        let spec = LatticeSpec::chain(4, 0.0).unwrap();
        let r = chi_lehman_and_phi(&spec).unwrap();
        let (basis, e, u) = bath_eigensystem(&spec).unwrap();
        let h = SparseSym::heisenberg(&basis, &spec.bath_bonds(), 0.0).to_dense();
        let g = u.column(0).into_owned();
        let proj = &g * g.transpose();
        let mut rhs = basis.sz(spec.probes.1).component_mul(&g);
        rhs -= &g * g.dot(&rhs);
        // (H - E0 + P0) is invertible and acts as H - E0 on the complement
        let m = &h - RMat::identity(basis.dim(), basis.dim()) * e[0] + proj;
        let x = m.lu().solve(&rhs).unwrap();
        let chi = -2.0 * basis.sz(spec.probes.0).component_mul(&g).dot(&x);
        assert_abs_diff_eq!(r.chi, chi, epsilon = 1e-10);
        assert!(r.chi > 0.0);
        let same = chi_lehman_and_phi(&spec.with_probes(1, 1).unwrap()).unwrap();
        assert_eq!(same.phi_per_alpha2, 0.0);
    }

    #[test]
    fn chi_sign_follows_parity() {
        let base = LatticeSpec::chain(6, 0.0).unwrap();
        for b in 1..6 {
            let r = chi_lehman_and_phi(&base.with_probes(0, b).unwrap()).unwrap();
            assert_eq!(r.chi > 0.0, b % 2 == 1, "separation {b}: {}", r.chi);
        }
    }

    #[test]
    fn s2_of_sector() {
        let basis = SectorBasis::new(2, 1);
        let s2 = total_s2(&basis).to_dense();
        let (w, _) = eigh_real(&s2);
        assert_abs_diff_eq!(w[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(w[1], 2.0, epsilon = 1e-14);
    }
}
