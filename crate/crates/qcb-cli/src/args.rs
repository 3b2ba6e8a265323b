//! Command-line grammar. Every argument struct serializes to the resolved
//! configuration written into output headers.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "qcb", version, about = "Entanglement measures, opto-mechanics and spin-bus probes", args_override_self = true)]
pub struct Cli {
    /// Plain key = value file; flags on the command line override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Negativity of the rotationally invariant two-qubit state (1 + f τ·τ)/4.
    Werner(WernerArgs),
    /// Symplectic spectrum and log-negativity of two-mode squeezed thermal states.
    Gaussian(GaussianArgs),
    /// Projected-subspace entanglement of the unitary cavity–mirror model:
    /// marker, subspace weight and negativity of the normalized projection.
    OptomechUnitary(UnitaryArgs),
    /// Stationary entanglement of the driven, damped cavity over a detuning sweep.
    OptomechSteady(SteadyArgs),
    /// Spin-bus probe theory.
    #[command(subcommand)]
    Lde(LdeCommand),
    /// Exact diagonalization of small lattices with two probes.
    #[command(subcommand)]
    Ed(EdCommand),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct WernerArgs {
    /// Werner parameter in [-1, 1/3].
    #[arg(long, allow_negative_numbers = true)]
    pub f: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GaussianArgs {
    /// Squeezing parameter (lower end when --r-max is given).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub r: f64,
    #[arg(long)]
    pub r_max: Option<f64>,
    /// Thermal occupancy of each mode (lower end when --nbar-max is given).
    #[arg(long, default_value_t = 0.0)]
    pub nbar: f64,
    #[arg(long)]
    pub nbar_max: Option<f64>,
    /// Squeezing phase.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub theta: f64,
    /// Points per swept axis.
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct UnitaryArgs {
    /// Coupling k = g/ω_m.
    #[arg(long)]
    pub k: f64,
    /// Modulus of the coherent cavity amplitude.
    #[arg(long)]
    pub alpha: f64,
    /// Phase of the coherent amplitude.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub alpha_phase: f64,
    /// Mirror thermal occupancy.
    #[arg(long, default_value_t = 0.0)]
    pub nbar: f64,
    /// Cavity frequency in units of ω_m (enters only phases).
    #[arg(long, default_value_t = 0.0)]
    pub omega_c: f64,
    /// Cavity Fock levels spanning the projected subspace.
    #[arg(long, value_delimiter = ',', default_value = "0,1")]
    pub cavity: Vec<usize>,
    /// Mirror Fock levels spanning the projected subspace.
    #[arg(long, value_delimiter = ',', default_value = "0,1")]
    pub mirror: Vec<usize>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub tmin: f64,
    #[arg(long, default_value_t = std::f64::consts::TAU)]
    pub tmax: f64,
    #[arg(long, default_value_t = 101)]
    pub steps: usize,
    /// Print the period-averaged normalized mutual information with this
    /// many trapezoid panels instead of the time table.
    #[arg(long)]
    pub average: Option<usize>,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KappaArg {
    /// κ = πc/(L𝓕)
    Full,
    /// κ = πc/(2L𝓕)
    Half,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SteadyArgs {
    /// Lowest effective detuning Δ/ω_m.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub dmin: f64,
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    pub dmax: f64,
    #[arg(long, default_value_t = 301)]
    pub steps: usize,
    /// Cavity length (m).
    #[arg(long, default_value_t = 1e-3)]
    pub length: f64,
    /// Effective mirror mass (kg).
    #[arg(long, default_value_t = 5e-12)]
    pub mass: f64,
    /// Laser wavelength (m).
    #[arg(long, default_value_t = 810e-9)]
    pub wavelength: f64,
    /// Input power (W).
    #[arg(long, default_value_t = 50e-3)]
    pub power: f64,
    #[arg(long, default_value_t = 1.07e4)]
    pub finesse: f64,
    /// Mechanical quality factor.
    #[arg(long, default_value_t = 1e5)]
    pub q_factor: f64,
    /// Bath temperature (K).
    #[arg(long, default_value_t = 0.4)]
    pub temperature: f64,
    /// Mechanical frequency ω_m/2π (Hz).
    #[arg(long, default_value_t = 1e7)]
    pub freq_m: f64,
    #[arg(long, value_enum, default_value_t = KappaArg::Full)]
    pub kappa_convention: KappaArg,
    /// Cavity decay rate (rad/s), overriding the finesse.
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum LdeCommand {
    /// Static bath susceptibility between the probe sites.
    Chi(ChiArgs),
    /// Probe correlator, effective coupling and concurrence versus temperature.
    Thermal(ThermalArgs),
    /// Least-squares canonical parameters from a temperature table.
    Fit(FitArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChiModel {
    Ring,
    Aklt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChiMethod {
    Closed,
    Numeric,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ChiArgs {
    #[arg(long, value_enum)]
    pub model: ChiModel,
    /// Ring length (ring model only).
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<usize>,
    /// Probe separation.
    #[arg(long)]
    pub r: usize,
    /// AKLT evaluation route.
    #[arg(long, value_enum, default_value_t = ChiMethod::Closed)]
    pub method: ChiMethod,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ThermalArgs {
    #[arg(long)]
    pub jcan: f64,
    #[arg(long, default_value_t = 0.0)]
    pub phi: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub eta: f64,
    /// Lowest k_B T (defaults to J_can/20).
    #[arg(long)]
    pub tmin: Option<f64>,
    /// Highest k_B T (defaults to 20 J_can).
    #[arg(long)]
    pub tmax: Option<f64>,
    #[arg(long, default_value_t = 12)]
    pub steps: usize,
    /// Space temperatures linearly instead of logarithmically.
    #[arg(long)]
    pub linear: bool,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitColumn {
    /// Fit the `correlator` column.
    Correlator,
    /// Fit the `J_ab` column.
    Jab,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    /// CSV with a `T` column and a `correlator` or `J_ab` column.
    #[arg(long = "in")]
    #[serde(rename = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = FitColumn::Correlator)]
    pub column: FitColumn,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum EdCommand {
    /// Thermal probe correlator table.
    Run(EdArgs),
    /// Comparison with perturbative and canonical theory, as JSON.
    Report(EdArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LatticeArg {
    Chain,
    Ladder,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EdArgs {
    #[arg(long, value_enum, default_value_t = LatticeArg::Chain)]
    pub lattice: LatticeArg,
    /// Sites per leg.
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: usize,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: f64,
    /// Bath exchange.
    #[arg(long, default_value_t = 1.0)]
    pub j: f64,
    /// `ends` or two comma-separated bath sites.
    #[arg(long, default_value = "ends")]
    pub probes: String,
    /// `auto` (12 log-spaced points from J_can/20 to 20 J_can) or a
    /// comma-separated list of k_B T.
    #[arg(long, default_value = "auto")]
    pub temps: String,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}
