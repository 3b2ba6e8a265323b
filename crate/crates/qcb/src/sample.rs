//! Seeded random generators used by tests, property suites and benches.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::qstate::DensityMatrix;
use crate::{CMat, C64};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gauss_c<R: Rng>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn ginibre<R: Rng>(rng: &mut R, r: usize, c: usize) -> CMat {
    CMat::from_fn(r, c, |_, _| gauss_c(rng))
}

/// Haar-random unitary (QR of a Ginibre matrix with phase fix).
pub fn unitary<R: Rng>(rng: &mut R, d: usize) -> CMat {
    let qr = ginibre(rng, d, d).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..d {
        let p = r[(j, j)];
        let ph = if p.norm() > 0.0 { p / p.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= ph;
        }
    }
    q
}

pub fn pure_vector<R: Rng>(rng: &mut R, d: usize) -> DVector<C64> {
    let v = DVector::from_fn(d, |_, _| gauss_c(rng));
    let n = v.norm();
    v / C64::new(n, 0.0)
}

/// Random mixed state of the given rank (induced measure).
pub fn density<R: Rng>(rng: &mut R, d: usize, rank: usize, split: Option<(usize, usize)>) -> DensityMatrix {
    let g = ginibre(rng, d, rank.max(1));
    DensityMatrix::normalized(&g * g.adjoint(), split).expect("Wishart matrix is a valid state")
}

/// Convex mixture of `terms` random product states on d_A ⊗ d_B.
pub fn separable_mixture<R: Rng>(rng: &mut R, da: usize, db: usize, terms: usize) -> DensityMatrix {
    let mut m = CMat::zeros(da * db, da * db);
    for _ in 0..terms {
        let w: f64 = rng.random::<f64>();
        let (ra, rb) = (1 + rng.random_range(0..da), 1 + rng.random_range(0..db));
        let a = density(rng, da, ra, None);
        let b = density(rng, db, rb, None);
        m += a.matrix().kronecker(b.matrix()) * C64::new(w, 0.0);
    }
    DensityMatrix::normalized(m, Some((da, db))).expect("mixture of products is a valid state")
}
