use thiserror::Error;

/// Everything that can go wrong inside the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("state has no bipartite split")]
    SplitRequired,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("state is not pure (purity {0})")]
    NotPure(f64),
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("normalized mutual information undefined: S_A + S_B = {0:e}")]
    UndefinedMutualInfo(f64),
    #[error("non-physical covariance matrix: {0}")]
    NonPhysical(String),
    #[error("covariance matrix is singular")]
    SingularCovariance,
    #[error("projected subspace has zero weight (trace {0:e})")]
    EmptySubspace(f64),
    #[error("Fock cutoff {cutoff} too small: Poisson tail {tail:e}")]
    Truncation { cutoff: usize, tail: f64 },
    #[error("drift matrix is not stable")]
    Unstable,
    #[error("linear system is singular")]
    Singular,
    #[error("no positive root of the steady-state cubic")]
    NoRoot,
    #[error("fit did not converge after {iterations} iterations (rms {rms:e})")]
    FitFailure { iterations: usize, rms: f64 },
    #[error("truncated spectrum misses thermal weight {0:e}")]
    ThermalTail(f64),
    #[error("system too large: {0}")]
    Resource(String),
    #[error("cannot isolate singlet+triplet sector: {0}")]
    SectorAmbiguity(String),
    #[error("degenerate ground state (splitting {0:e})")]
    DegenerateGroundState(f64),
    #[error("quadrature failed to reach tolerance (estimate {estimate:e}, error {error:e})")]
    Quadrature { estimate: f64, error: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
