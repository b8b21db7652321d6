//! Envelope models: no-ramp, ramp-aware baseline, and pre-ramped.

pub mod builder;

use flexenv_lp::{Direction, LpError, LpSolution, LpSolver, LpStatus};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netmodel::{
    sensitivity_matrices, voltage_profile, NetworkError, Scenario, SensitivityMatrices,
    UncertaintySpec,
};
use builder::{gcp_expr, injections, soc_expr, EnvelopeBuilder, Points};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvelopeKind {
    NoRamp,
    Baseline,
    PreRamp,
}

impl EnvelopeKind {
    pub const ALL: [EnvelopeKind; 3] = [EnvelopeKind::NoRamp, EnvelopeKind::Baseline, EnvelopeKind::PreRamp];

    pub fn name(self) -> &'static str {
        match self {
            EnvelopeKind::NoRamp => "noramp",
            EnvelopeKind::Baseline => "baseline",
            EnvelopeKind::PreRamp => "preramp",
        }
    }
}

impl std::str::FromStr for EnvelopeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "noramp" | "no-ramp" => Ok(EnvelopeKind::NoRamp),
            "baseline" => Ok(EnvelopeKind::Baseline),
            "preramp" | "pre-ramp" => Ok(EnvelopeKind::PreRamp),
            _ => Err(format!("unknown model kind '{s}'")),
        }
    }
}

/// How the storage cross-cumulative energy rows are treated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SocMode {
    /// Keep the cross-cumulative rows. With κ = 1 they pin the upper and
    /// lower storage powers together on every step but the last.
    Strict,
    /// Drop them; the SoC box on both trajectories already bounds every
    /// interpolated schedule.
    Sufficient,
}

impl std::str::FromStr for SocMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "strict" => Ok(SocMode::Strict),
            "sufficient" => Ok(SocMode::Sufficient),
            _ => Err(format!("unknown SoC mode '{s}'")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeOptions {
    pub kind: EnvelopeKind,
    pub soc_mode: SocMode,
    /// Apply ramp limits between `p_init` and the first step.
    pub initial_ramp: bool,
    /// Use 2r / 2x in the voltage sensitivities.
    pub factor2: bool,
    pub uncertainty: UncertaintySpec,
}

impl EnvelopeOptions {
    pub fn new(kind: EnvelopeKind) -> Self {
        Self {
            kind,
            soc_mode: SocMode::Strict,
            initial_ramp: true,
            factor2: false,
            uncertainty: UncertaintySpec::default(),
        }
    }

    pub fn with_kind(&self, kind: EnvelopeKind) -> Self {
        Self { kind, ..self.clone() }
    }

    pub fn sensitivities(&self, sc: &Scenario) -> Result<SensitivityMatrices, NetworkError> {
        let s = sensitivity_matrices(&sc.network)?;
        Ok(if self.factor2 { s.doubled() } else { s })
    }
}

#[derive(Debug, Error)]
pub enum EnvelopeError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("model is infeasible: {0}")]
    Infeasible(String),
    #[error("model is unbounded (check device limits)")]
    Unbounded,
    #[error("solver stopped at its iteration limit")]
    IterationLimit,
}

/// Per-device envelope. Fields that do not apply to a device are empty.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DeviceEnvelope {
    pub bus: usize,
    pub p_up: Vec<f64>,
    pub p_dn: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub q_up: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub q_dn: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub soc_up: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub soc_dn: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pre_up: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pre_dn: Vec<f64>,
}

impl DeviceEnvelope {
    /// Pre-ramped points for a generator (moves inward).
    pub fn gen_pre_points(&self) -> (Vec<f64>, Vec<f64>) {
        pre_points(self, -1.0)
    }

    /// Pre-ramped points for a storage unit (moves outward).
    pub fn ess_pre_points(&self) -> (Vec<f64>, Vec<f64>) {
        pre_points(self, 1.0)
    }
}

fn pre_points(d: &DeviceEnvelope, sign: f64) -> (Vec<f64>, Vec<f64>) {
    if d.pre_up.is_empty() {
        return (d.p_up.clone(), d.p_dn.clone());
    }
    let up = d.p_up.iter().zip(&d.pre_up).map(|(p, r)| p + sign * r).collect();
    let dn = d.p_dn.iter().zip(&d.pre_dn).map(|(p, r)| p - sign * r).collect();
    (up, dn)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSolution {
    pub kind: EnvelopeKind,
    pub options: EnvelopeOptions,
    pub steps: usize,
    pub dt: f64,
    pub area_kwh: f64,
    pub gcp_up: Vec<f64>,
    pub gcp_dn: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gcp_up_pre: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gcp_dn_pre: Vec<f64>,
    pub generators: Vec<DeviceEnvelope>,
    pub storages: Vec<DeviceEnvelope>,
    /// Squared voltages `[step][bus - 1]`, slack included.
    pub u_up: Vec<Vec<f64>>,
    pub u_dn: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub u_up_pre: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub u_dn_pre: Vec<Vec<f64>>,
    pub solver: String,
}

impl EnvelopeSolution {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("envelope serialization cannot fail")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// `t,gcp_dn,gcp_up` rows, 1-based steps.
    pub fn gcp_csv(&self) -> String {
        let mut out = String::from("t,gcp_dn,gcp_up\n");
        for t in 0..self.steps {
            out.push_str(&format!("{},{},{}\n", t + 1, self.gcp_dn[t], self.gcp_up[t]));
        }
        out
    }

    /// Smallest and largest voltage magnitude over every reported point.
    pub fn voltage_extremes(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for m in [&self.u_up, &self.u_dn, &self.u_up_pre, &self.u_dn_pre] {
            for &u in m.iter().flatten() {
                lo = lo.min(u);
                hi = hi.max(u);
            }
        }
        (lo.sqrt(), hi.sqrt())
    }
}

/// Σ_t (gcp_up − gcp_dn) Δt.
pub fn envelope_area(sol: &EnvelopeSolution) -> f64 {
    sol.gcp_up
        .iter()
        .zip(&sol.gcp_dn)
        .map(|(u, d)| (u - d) * sol.dt)
        .sum()
}

pub(crate) fn check_status(sol: &LpSolution, what: &str) -> Result<(), EnvelopeError> {
    match sol.status {
        LpStatus::Optimal => Ok(()),
        LpStatus::Infeasible => Err(EnvelopeError::Infeasible(format!(
            "no {what} satisfies the device, ramp, energy and voltage limits together"
        ))),
        LpStatus::Unbounded => Err(EnvelopeError::Unbounded),
        LpStatus::IterationLimit => Err(EnvelopeError::IterationLimit),
    }
}

/// Maximizes the envelope area for the configured model kind.
pub fn solve_envelope(
    sc: &Scenario,
    opts: &EnvelopeOptions,
    solver: &dyn LpSolver,
) -> Result<EnvelopeSolution, EnvelopeError> {
    let mut b = EnvelopeBuilder::new(sc, opts, Direction::Maximize)?;
    b.add_envelope_rows()?;
    let obj = b.area_expr();
    b.model.set_objective(Direction::Maximize, obj)?;
    log::info!(
        "{} envelope: {} variables, {} rows",
        opts.kind.name(),
        b.model.num_variables(),
        b.model.num_constraints()
    );
    let sol = solver.solve(&b.model)?;
    check_status(&sol, "envelope")?;
    log::debug!("solved in {} pivots, area {:.6}", sol.iterations, sol.objective_value);
    Ok(extract(&b, &sol, &solver.name()))
}

pub(crate) fn extract(b: &EnvelopeBuilder, sol: &LpSolution, solver: &str) -> EnvelopeSolution {
    let sc = b.sc;
    let n_t = sc.steps();
    let dt = sc.dt();
    let up = b.up.points();
    let dn = b.dn.points();
    let (pg_u, qg_u, pe_u) = up.eval(sol);
    let (pg_d, qg_d, pe_d) = dn.eval(sol);
    let pre = b.pre.as_ref().map(|p| {
        let ev = |m: &Vec<Vec<flexenv_lp::VarRef>>| -> Vec<Vec<f64>> {
            m.iter().map(|r| r.iter().map(|&v| sol.value(v)).collect()).collect()
        };
        (ev(&p.g_up), ev(&p.g_dn), ev(&p.e_up), ev(&p.e_dn))
    });

    let generators = sc
        .generators
        .iter()
        .enumerate()
        .map(|(g, gen)| DeviceEnvelope {
            bus: gen.bus,
            p_up: pg_u[g].clone(),
            p_dn: pg_d[g].clone(),
            q_up: qg_u[g].clone(),
            q_dn: qg_d[g].clone(),
            pre_up: pre.as_ref().map(|p| p.0[g].clone()).unwrap_or_default(),
            pre_dn: pre.as_ref().map(|p| p.1[g].clone()).unwrap_or_default(),
            ..Default::default()
        })
        .collect();
    let storages = sc
        .storages
        .iter()
        .enumerate()
        .map(|(e, ess)| {
            let soc = |p: &Points| -> Vec<f64> {
                (0..n_t).map(|t| sol.eval(&soc_expr(ess, &p.pe[e], t, dt))).collect()
            };
            DeviceEnvelope {
                bus: ess.bus,
                p_up: pe_u[e].clone(),
                p_dn: pe_d[e].clone(),
                soc_up: soc(&up),
                soc_dn: soc(&dn),
                pre_up: pre.as_ref().map(|p| p.2[e].clone()).unwrap_or_default(),
                pre_dn: pre.as_ref().map(|p| p.3[e].clone()).unwrap_or_default(),
                ..Default::default()
            }
        })
        .collect();

    let gcp = |p: &Points| -> Vec<f64> { (0..n_t).map(|t| sol.eval(&gcp_expr(sc, p, t))).collect() };
    let volts = |p: &Points| -> Vec<Vec<f64>> { point_voltages(b, p, sol) };
    let gcp_up = gcp(&up);
    let gcp_dn = gcp(&dn);
    let area_kwh = gcp_up.iter().zip(&gcp_dn).map(|(u, d)| (u - d) * dt).sum();
    let (gcp_up_pre, gcp_dn_pre, u_up_pre, u_dn_pre) = match b.pre_points() {
        Some((ub, db)) => (gcp(&ub), gcp(&db), volts(&ub), volts(&db)),
        None => Default::default(),
    };
    EnvelopeSolution {
        kind: b.opts.kind,
        options: b.opts.clone(),
        steps: n_t,
        dt,
        area_kwh,
        gcp_up,
        gcp_dn,
        gcp_up_pre,
        gcp_dn_pre,
        generators,
        storages,
        u_up: volts(&up),
        u_dn: volts(&dn),
        u_up_pre,
        u_dn_pre,
        solver: solver.to_string(),
    }
}

fn point_voltages(b: &EnvelopeBuilder, p: &Points, sol: &LpSolution) -> Vec<Vec<f64>> {
    let s = b.sens.s_base_kva;
    (0..b.sc.steps())
        .map(|t| {
            let (pi, qi) = injections(b.sc, p, t);
            let pv: Vec<f64> = pi[1..].iter().map(|x| sol.eval(x) / s).collect();
            let qv: Vec<f64> = qi[1..].iter().map(|x| sol.eval(x) / s).collect();
            let mut u = vec![1.0];
            u.extend(voltage_profile(&b.sens, &pv, &qv).expect("dimensions fixed by the builder"));
            u
        })
        .collect()
}
