//! One function per leaf subcommand; each returns the bytes to emit.

use std::f64::consts::TAU;
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use qcb::ed::{low_spectrum_jcan, theory_consistency_report, LatticeSpec, SolverOptions, ThermalLevels};
use qcb::gaussian::{logneg_gaussian, ppt_tilde_dminus, two_mode_squeezed_thermal_cov};
use qcb::lde::{
    chi_aklt, chi_ring, critical_temperature, fit_canonical_params, temperature_grid, AkltMethod, CanonicalParams,
    RingGeometry, SampleKind,
};
use qcb::optomech::{averaged_mi, linear_entropies_closed, marker_upsilon, projected_matrix, projected_state, EMPTY_TRACE};
use qcb::qstate::{concurrence_from_correlator, negativity, werner_state};
use qcb::stationary::{derive_physical_params, detuning_sweep, KappaConvention, PhysicalInputs};
use qcb::{OptoUnitaryParams, SubspaceSelector, C64};

use crate::args::*;
use crate::table::{fmt_num, Cell, Table};

#[derive(Debug)]
pub enum CliError {
    /// Bad flag values or combinations: exit 2.
    Usage(String),
    /// Numerical-domain failures from the library: exit 3.
    Numeric(qcb::Error),
    /// Unreadable inputs or unwritable outputs: exit 3.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) | CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Numeric(e) => write!(f, "numeric error: {e}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<qcb::Error> for CliError {
    fn from(e: qcb::Error) -> Self {
        CliError::Numeric(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// `key = value` lines for the resolved arguments, in flag spelling.
pub fn config_lines<A: Serialize>(command: &str, args: &A) -> Vec<String> {
    let mut lines = vec![format!("qcb {}", env!("CARGO_PKG_VERSION")), format!("command = {command}")];
    if let Ok(serde_json::Value::Object(map)) = serde_json::to_value(args) {
        for (k, v) in map {
            let v = match v {
                serde_json::Value::Null => continue,
                serde_json::Value::String(s) => s,
                serde_json::Value::Array(xs) => xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
                other => other.to_string(),
            };
            lines.push(format!("{} = {v}", k.replace('_', "-")));
        }
    }
    lines
}

fn config_json<A: Serialize>(command: &str, args: &A) -> serde_json::Value {
    let mut v = serde_json::to_value(args).unwrap_or(serde_json::Value::Null);
    if let serde_json::Value::Object(m) = &mut v {
        m.insert("command".into(), json!(command));
    }
    v
}

fn grid(lo: f64, hi: f64, n: usize, log: bool) -> CliResult<Vec<f64>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    if log && !(lo > 0.0 && hi > 0.0) {
        return Err(CliError::Usage(format!("log grid needs positive ends, got [{lo}, {hi}]")));
    }
    Ok((0..n)
        .map(|i| {
            let s = i as f64 / (n - 1) as f64;
            if log {
                (lo.ln() + (hi.ln() - lo.ln()) * s).exp()
            } else {
                lo + (hi - lo) * s
            }
        })
        .collect())
}

pub fn werner(a: &WernerArgs) -> CliResult<Vec<u8>> {
    let n = negativity(&werner_state(a.f)?)?;
    Ok(format!("N={} EN={}\n", fmt_num(n.n), fmt_num(n.en)).into_bytes())
}

pub fn gaussian(a: &GaussianArgs) -> CliResult<Vec<u8>> {
    let rs = match a.r_max {
        Some(hi) => grid(a.r, hi, a.steps, false)?,
        None => vec![a.r],
    };
    let ns = match a.nbar_max {
        Some(hi) => grid(a.nbar, hi, a.steps, false)?,
        None => vec![a.nbar],
    };
    let mut t = Table::new(config_lines("gaussian", a), &["r", "n_bar", "nu_minus_pt", "EN"]);
    for &r in &rs {
        for &n in &ns {
            let v = two_mode_squeezed_thermal_cov(r, a.theta, n)?.cov4()?;
            t.push(vec![r.into(), n.into(), ppt_tilde_dminus(&v)?.into(), logneg_gaussian(&v)?.into()]);
        }
    }
    Ok(t.to_bytes())
}

pub fn optomech_unitary(a: &UnitaryArgs) -> CliResult<Vec<u8>> {
    let p = OptoUnitaryParams::new(a.k, C64::from_polar(a.alpha, a.alpha_phase), a.nbar, 0.0)?.with_omega_c(a.omega_c);
    if let Some(n) = a.average {
        let m = averaged_mi(&p, n)?;
        return Ok(format!("MI_avg={} MI_avg_doubled={}\n", fmt_num(m.value), fmt_num(m.doubled)).into_bytes());
    }
    let sel = SubspaceSelector::new(a.cavity.clone(), a.mirror.clone())?;
    let (dc, dm) = sel.dims();
    let with_marker = dc == 2 && (dm == 2 || dm == 3);
    let times = grid(a.tmin, a.tmax, a.steps, false)?;
    let rows: Vec<Vec<Cell>> = times
        .par_iter()
        .map(|&t| -> CliResult<Vec<Cell>> {
            let q = p.at_time(t);
            let ups = if with_marker { Cell::Num(marker_upsilon(&q, &sel)?) } else { Cell::Empty };
            let w = projected_matrix(&q, &sel).trace().re;
            let (n, en) = if w < EMPTY_TRACE {
                (None, None)
            } else {
                let n = negativity(&projected_state(&q, &sel)?)?;
                (Some(n.n), Some(n.en))
            };
            let e = linear_entropies_closed(&q, None)?;
            let den = e.cavity + e.mirror;
            let mi = (den > 1e-12).then(|| 1.0 - e.total / den);
            Ok(vec![t.into(), ups, w.into(), n.into(), en.into(), e.total.into(), e.cavity.into(), e.mirror.into(), mi.into()])
        })
        .collect::<CliResult<_>>()?;
    let mut tab = Table::new(config_lines("optomech-unitary", a), &["t", "upsilon", "weight", "N", "EN", "S_tot", "S_cav", "S_mir", "MI"]);
    for r in rows {
        tab.push(r);
    }
    Ok(tab.to_bytes())
}

pub const STEADY_COLUMNS: [&str; 24] = [
    "Delta_over_wm", "alpha_s", "G", "S1", "S2", "stable", "EN", "n_eff", "V11", "V12", "V13", "V14", "V21", "V22", "V23",
    "V24", "V31", "V32", "V33", "V34", "V41", "V42", "V43", "V44",
];

pub fn optomech_steady(a: &SteadyArgs) -> CliResult<Vec<u8>> {
    let inp = PhysicalInputs {
        length: a.length,
        mass: a.mass,
        wavelength: a.wavelength,
        power: a.power,
        finesse: a.finesse,
        q_factor: a.q_factor,
        temperature: a.temperature,
        omega_m: TAU * a.freq_m,
        convention: match a.kappa_convention {
            KappaArg::Full => KappaConvention::FullWidth,
            KappaArg::Half => KappaConvention::HalfWidth,
        },
        kappa_override: a.kappa,
    };
    let d = derive_physical_params(&inp)?;
    let p = d.params;
    let mut comments = config_lines("optomech-steady", a);
    comments.push(format!(
        "derived: kappa = {} gamma-m = {} g = {} drive-e = {} n-bar = {}",
        fmt_num(p.kappa),
        fmt_num(p.gamma_m),
        fmt_num(p.g),
        fmt_num(p.drive_e),
        fmt_num(p.n_bar)
    ));
    if let Some(w) = &d.warning {
        comments.push(format!("warning: {w}"));
    }
    let deltas = grid(a.dmin, a.dmax, a.steps, false)?;
    let pts = detuning_sweep(&p, &deltas.iter().map(|x| x * p.omega_m).collect::<Vec<_>>())?;
    let mut t = Table::new(comments, &STEADY_COLUMNS);
    for (x, q) in deltas.iter().zip(&pts) {
        let mut row: Vec<Cell> = vec![
            (*x).into(),
            q.steady.alpha_s.into(),
            q.steady.big_g.into(),
            q.stability.s1.into(),
            q.stability.s2.into(),
            q.stability.stable.into(),
            q.log_neg.into(),
            q.n_eff.into(),
        ];
        for i in 0..4 {
            for j in 0..4 {
                row.push(q.cov.map(|v| v[(i, j)]).into());
            }
        }
        t.push(row);
    }
    Ok(t.to_bytes())
}

pub fn lde_chi(a: &ChiArgs) -> CliResult<Vec<u8>> {
    let v = match a.model {
        ChiModel::Ring => {
            let l = a.l.ok_or_else(|| CliError::Usage("--L is required for the ring model".into()))?;
            chi_ring(&RingGeometry::new(l, a.r)?)?
        }
        ChiModel::Aklt => {
            let m = match a.method {
                ChiMethod::Closed => AkltMethod::Closed,
                ChiMethod::Numeric => AkltMethod::Numeric,
            };
            chi_aklt(a.r, m)?
        }
    };
    Ok(format!("{}\n", fmt_num(v)).into_bytes())
}

pub const THERMAL_COLUMNS: [&str; 4] = ["T", "correlator", "J_ab", "concurrence"];

pub fn lde_thermal(a: &ThermalArgs) -> CliResult<Vec<u8>> {
    let cp = CanonicalParams::new(a.jcan, a.phi, a.eta)?;
    let scale = a.jcan.abs();
    let temps = grid(a.tmin.unwrap_or(scale / 20.0), a.tmax.unwrap_or(20.0 * scale), a.steps, !a.linear)?;
    let mut t = Table::new(config_lines("lde thermal", a), &THERMAL_COLUMNS);
    for &kt in &temps {
        if !(kt > 0.0) {
            return Err(CliError::Usage(format!("temperature {kt} must be positive")));
        }
        let c = cp.correlator(1.0 / kt);
        t.push(vec![kt.into(), c.into(), cp.j_ab(1.0 / kt)?.into(), concurrence_from_correlator(c).into()]);
    }
    Ok(t.to_bytes())
}

fn read_table(path: &Path) -> CliResult<Table> {
    let f = std::fs::File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Table::read(f).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn lde_fit(a: &FitArgs) -> CliResult<Vec<u8>> {
    let tab = read_table(&a.input)?;
    let (name, kind) = match a.column {
        FitColumn::Correlator => ("correlator", SampleKind::Correlator),
        FitColumn::Jab => ("J_ab", SampleKind::Jab),
    };
    let missing = |c: &str| CliError::Io(format!("{}: no numeric `{c}` column", a.input.display()));
    let ts = tab.column("T").ok_or_else(|| missing("T"))?;
    let vs = tab.column(name).ok_or_else(|| missing(name))?;
    let samples: Vec<(f64, f64)> = ts.iter().zip(&vs).map(|(t, v)| (1.0 / t, *v)).collect();
    let fit = fit_canonical_params(&samples, kind)?;
    let ct = critical_temperature(&fit.params).ok();
    let v = json!({
        "config": config_json("lde fit", a),
        "fit": {
            "j_can": fit.params.j_can,
            "phi": fit.params.phi,
            "eta": fit.params.eta,
            "rms": fit.rms,
            "iterations": fit.iterations,
            "samples": samples.len(),
        },
        "critical_temperature": ct,
    });
    Ok(pretty(&v))
}

fn pretty(v: &serde_json::Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s.into_bytes()
}

fn lattice(a: &EdArgs) -> CliResult<LatticeSpec> {
    let spec = match a.lattice {
        LatticeArg::Chain => LatticeSpec::chain(a.l, a.alpha)?,
        LatticeArg::Ladder => LatticeSpec::ladder(a.l, a.alpha)?,
    }
    .with_j(a.j)?;
    if a.probes == "ends" {
        return Ok(spec);
    }
    let sites: Vec<usize> = a
        .probes
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("--probes `{}`: expected `ends` or two site indices", a.probes)))?;
    match sites[..] {
        [x, y] => Ok(spec.with_probes(x, y)?),
        _ => Err(CliError::Usage(format!("--probes `{}`: expected two sites", a.probes))),
    }
}

pub const ED_COLUMNS: [&str; 4] = ["T", "beta", "correlator", "concurrence"];

pub fn ed_run(a: &EdArgs) -> CliResult<Vec<u8>> {
    let spec = lattice(a)?;
    let opts = SolverOptions::default();
    let temps = if a.temps == "auto" {
        let j = low_spectrum_jcan(&spec, &opts)?.j_can;
        if j == 0.0 {
            return Err(CliError::Usage("--temps auto needs a nonzero splitting (alpha ≠ 0)".into()));
        }
        temperature_grid(j.abs(), 12)
    } else {
        a.temps
            .split(',')
            .map(|s| s.trim().parse::<f64>().ok().filter(|t| *t > 0.0))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| CliError::Usage(format!("--temps `{}`: expected `auto` or positive numbers", a.temps)))?
    };
    let thermal = ThermalLevels::new(&spec, &opts)?;
    let mut t = Table::new(config_lines("ed run", a), &ED_COLUMNS);
    for kt in temps {
        let c = thermal.correlator(1.0 / kt)?;
        t.push(vec![kt.into(), (1.0 / kt).into(), c.into(), concurrence_from_correlator(c).into()]);
    }
    Ok(t.to_bytes())
}

pub fn ed_report(a: &EdArgs) -> CliResult<Vec<u8>> {
    let r = theory_consistency_report(&lattice(a)?, &SolverOptions::default())?;
    let v = json!({
        "config": config_json("ed report", a),
        "report": r,
        "t_star_ratio": r.t_star_ratio(),
    });
    Ok(pretty(&v))
}
