//! Disaggregation of aggregate GCP trajectories into device schedules,
//! feasibility checking, and Monte Carlo verification of envelopes.

mod sampler;

pub use sampler::{sample_trajectories, SampleKind, SamplerConfig, TrajectorySample};

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envelope::{EnvelopeKind, EnvelopeSolution};
use crate::netmodel::{
    uncertainty_margins, voltage_profile, NetworkError, RobustMargins, Scenario, SensitivityMatrices,
};

/// Absolute tolerance of every feasibility check (kW, kWh, p.u.²).
pub const FEAS_TOL: f64 = 1e-6;
const BAND_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum DisaggError {
    #[error("trajectory leaves the envelope at step {step}: {value} not in [{lower}, {upper}]")]
    EnvelopeViolation {
        step: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("trajectory has {got} steps, envelope has {expected}")]
    Length { expected: usize, got: usize },
    #[error("envelope does not match the scenario: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    GenPower,
    GenReactive,
    GenRamp,
    EssPower,
    Soc,
    Voltage,
    Aggregation,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::GenPower => "gen_power",
            Family::GenReactive => "gen_reactive",
            Family::GenRamp => "gen_ramp",
            Family::EssPower => "ess_power",
            Family::Soc => "soc",
            Family::Voltage => "voltage",
            Family::Aggregation => "aggregation",
        };
        f.write_str(s)
    }
}

/// One violated limit. `element` is a device index for device families, a bus
/// id for voltages, and 0 for the aggregation identity; `step` is 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub family: Family,
    pub element: usize,
    pub step: usize,
    pub magnitude: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

/// Device schedules realized from one aggregate trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisaggregationResult {
    pub lambdas: Vec<f64>,
    pub gcp: Vec<f64>,
    pub pg: Vec<Vec<f64>>,
    pub qg: Vec<Vec<f64>>,
    pub pe: Vec<Vec<f64>>,
    /// Realized SoC at the start of each step.
    pub soc: Vec<Vec<f64>>,
    /// Pre-ramped points (pre-ramp envelopes only).
    pub pg_pre: Option<Vec<Vec<f64>>>,
    pub pe_pre: Option<Vec<Vec<f64>>>,
    /// Squared voltages `[step][bus - 1]`.
    pub u: Vec<Vec<f64>>,
    pub u_pre: Option<Vec<Vec<f64>>>,
}

/// Reusable disaggregation context for one (scenario, envelope) pair.
pub struct Disaggregator<'a> {
    sc: &'a Scenario,
    env: &'a EnvelopeSolution,
    sens: SensitivityMatrices,
    margins: RobustMargins,
    gen_pre: Vec<(Vec<f64>, Vec<f64>)>,
    ess_pre: Vec<(Vec<f64>, Vec<f64>)>,
}

impl<'a> Disaggregator<'a> {
    pub fn new(sc: &'a Scenario, env: &'a EnvelopeSolution) -> Result<Self, DisaggError> {
        if env.steps != sc.steps() {
            return Err(DisaggError::Mismatch(format!(
                "{} steps vs {}",
                env.steps,
                sc.steps()
            )));
        }
        if env.generators.len() != sc.generators.len() || env.storages.len() != sc.storages.len() {
            return Err(DisaggError::Mismatch("device counts differ".into()));
        }
        let sens = env.options.sensitivities(sc)?;
        let margins = uncertainty_margins(&sens, &sc.profiles, &env.options.uncertainty)?;
        Ok(Self {
            sc,
            env,
            sens,
            margins,
            gen_pre: env.generators.iter().map(|d| d.gen_pre_points()).collect(),
            ess_pre: env.storages.iter().map(|d| d.ess_pre_points()).collect(),
        })
    }

    fn pre_ramped(&self) -> bool {
        self.env.kind == EnvelopeKind::PreRamp
    }

    pub fn lambdas(&self, traj: &[f64]) -> Result<Vec<f64>, DisaggError> {
        lambda_coefficients(traj, self.env)
    }

    pub fn interpolate(&self, lambdas: &[f64]) -> DisaggregationResult {
        let env = self.env;
        let n_t = env.steps;
        let mix = |up: &[f64], dn: &[f64]| -> Vec<f64> {
            (0..n_t).map(|t| lambdas[t] * dn[t] + (1.0 - lambdas[t]) * up[t]).collect()
        };
        let pg: Vec<Vec<f64>> = env.generators.iter().map(|d| mix(&d.p_up, &d.p_dn)).collect();
        let qg: Vec<Vec<f64>> = env.generators.iter().map(|d| mix(&d.q_up, &d.q_dn)).collect();
        let pe: Vec<Vec<f64>> = env.storages.iter().map(|d| mix(&d.p_up, &d.p_dn)).collect();
        let (pg_pre, pe_pre) = if self.pre_ramped() {
            (
                Some(self.gen_pre.iter().map(|(u, d)| mix(u, d)).collect::<Vec<_>>()),
                Some(self.ess_pre.iter().map(|(u, d)| mix(u, d)).collect::<Vec<_>>()),
            )
        } else {
            (None, None)
        };
        let soc_driver = pe_pre.as_ref().unwrap_or(&pe);
        let soc = self
            .sc
            .storages
            .iter()
            .zip(soc_driver)
            .map(|(e, p)| realized_soc(e.e_init, e.kappa, p, self.sc.dt()))
            .collect();
        let gcp = self.gcp(&pg, &pe);
        let u = self.voltages(&pg, &qg, &pe);
        let u_pre = match (&pg_pre, &pe_pre) {
            (Some(a), Some(b)) => Some(self.voltages(a, &qg, b)),
            _ => None,
        };
        DisaggregationResult {
            lambdas: lambdas.to_vec(),
            gcp,
            pg,
            qg,
            pe,
            soc,
            pg_pre,
            pe_pre,
            u,
            u_pre,
        }
    }

    fn injections(&self, t: usize, pg: &[Vec<f64>], qg: &[Vec<f64>], pe: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        let n = self.sc.network.num_buses();
        let prof = &self.sc.profiles;
        let mut p: Vec<f64> = (0..n).map(|b| prof.net_p(t, b)).collect();
        let mut q: Vec<f64> = (0..n).map(|b| -prof.load_q[t][b]).collect();
        for (g, gen) in self.sc.generators.iter().enumerate() {
            p[gen.bus - 1] += pg[g][t];
            q[gen.bus - 1] += qg[g][t];
        }
        for (e, ess) in self.sc.storages.iter().enumerate() {
            p[ess.bus - 1] += pe[e][t];
        }
        (p, q)
    }

    fn gcp(&self, pg: &[Vec<f64>], pe: &[Vec<f64>]) -> Vec<f64> {
        let prof = &self.sc.profiles;
        (0..self.env.steps)
            .map(|t| {
                let exo: f64 = (0..self.sc.network.num_buses()).map(|b| prof.net_p(t, b)).sum();
                exo + pg.iter().map(|r| r[t]).sum::<f64>() + pe.iter().map(|r| r[t]).sum::<f64>()
            })
            .collect()
    }

    fn voltages(&self, pg: &[Vec<f64>], qg: &[Vec<f64>], pe: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let s = self.sens.s_base_kva;
        (0..self.env.steps)
            .map(|t| {
                let (p, q) = self.injections(t, pg, qg, pe);
                let pu: Vec<f64> = p[1..].iter().map(|x| x / s).collect();
                let qu: Vec<f64> = q[1..].iter().map(|x| x / s).collect();
                let mut u = vec![1.0];
                u.extend(voltage_profile(&self.sens, &pu, &qu).expect("sizes match the network"));
                u
            })
            .collect()
    }

    /// Checks every device and network limit on a realized schedule.
    pub fn check(&self, res: &DisaggregationResult, traj: &[f64]) -> FeasibilityReport {
        let sc = self.sc;
        let n_t = self.env.steps;
        let mut v = Vec::new();
        let mut push = |family, element, t: usize, magnitude: f64| {
            if magnitude > FEAS_TOL {
                v.push(Violation {
                    family,
                    element,
                    step: t + 1,
                    magnitude,
                });
            }
        };
        let excess = |x: f64, lo: f64, hi: f64| (lo - x).max(x - hi).max(0.0);

        for (g, gen) in sc.generators.iter().enumerate() {
            let mut series = vec![&res.pg[g]];
            if let Some(pre) = &res.pg_pre {
                series.push(&pre[g]);
            }
            for t in 0..n_t {
                let worst = series
                    .iter()
                    .map(|s| excess(s[t], gen.p_min, gen.p_max))
                    .fold(0.0, f64::max);
                push(Family::GenPower, g, t, worst);
                push(Family::GenReactive, g, t, excess(res.qg[g][t], gen.q_min, gen.q_max));
            }
            // physical transitions: from the (pre-ramped) point at t-1 to the
            // dispatched point at t
            let from = res.pg_pre.as_ref().map(|p| &p[g]).unwrap_or(&res.pg[g]);
            for t in 0..n_t {
                let prev = match t {
                    0 if !self.env.options.initial_ramp => continue,
                    0 => gen.p_init,
                    _ => from[t - 1],
                };
                let d = res.pg[g][t] - prev;
                push(Family::GenRamp, g, t, (d - gen.ramp_up).max(-d - gen.ramp_down));
            }
        }

        for (e, ess) in sc.storages.iter().enumerate() {
            let mut series = vec![&res.pe[e]];
            if let Some(pre) = &res.pe_pre {
                series.push(&pre[e]);
            }
            for t in 0..n_t {
                let worst = series
                    .iter()
                    .map(|s| excess(s[t], -ess.p_max, ess.p_max))
                    .fold(0.0, f64::max);
                push(Family::EssPower, e, t, worst);
                push(Family::Soc, e, t, excess(res.soc[e][t], ess.e_min, ess.e_max));
            }
        }

        let net = &sc.network;
        let mut volt_sets = vec![&res.u];
        if let Some(u) = &res.u_pre {
            volt_sets.push(u);
        }
        for t in 0..n_t {
            for i in 1..net.num_buses() {
                let d = self.margins.delta_u[t][i - 1];
                let worst = volt_sets
                    .iter()
                    .map(|u| excess(u[t][i], net.u_min + d, net.u_max - d))
                    .fold(0.0, f64::max);
                push(Family::Voltage, i + 1, t, worst);
            }
            push(Family::Aggregation, 0, t, (res.gcp[t] - traj[t]).abs());
        }
        FeasibilityReport {
            feasible: v.is_empty(),
            violations: v,
        }
    }

    pub fn run(&self, traj: &[f64]) -> Result<(DisaggregationResult, FeasibilityReport), DisaggError> {
        let lam = self.lambdas(traj)?;
        let res = self.interpolate(&lam);
        let rep = self.check(&res, traj);
        Ok((res, rep))
    }
}

/// Realized SoC at the start of each step.
pub fn realized_soc(e_init: f64, kappa: f64, p: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(p.len());
    let mut e = e_init;
    for t in 0..p.len() {
        if t > 0 {
            e = kappa * e - p[t - 1] * dt;
        }
        out.push(e);
    }
    out
}

/// λ_t placing `traj[t]` between the envelope bounds; 0 on zero-width steps.
pub fn lambda_coefficients(traj: &[f64], env: &EnvelopeSolution) -> Result<Vec<f64>, DisaggError> {
    if traj.len() != env.steps {
        return Err(DisaggError::Length {
            expected: env.steps,
            got: traj.len(),
        });
    }
    traj.iter()
        .enumerate()
        .map(|(t, &x)| {
            let (up, dn) = (env.gcp_up[t], env.gcp_dn[t]);
            if x > up + BAND_TOL || x < dn - BAND_TOL || !x.is_finite() {
                return Err(DisaggError::EnvelopeViolation {
                    step: t + 1,
                    value: x,
                    lower: dn,
                    upper: up,
                });
            }
            let w = up - dn;
            Ok(if w > 0.0 { (up - x) / w } else { 0.0 })
        })
        .collect()
}

pub fn interpolate_schedules(
    lambdas: &[f64],
    env: &EnvelopeSolution,
    sc: &Scenario,
) -> Result<DisaggregationResult, DisaggError> {
    if lambdas.len() != env.steps {
        return Err(DisaggError::Length {
            expected: env.steps,
            got: lambdas.len(),
        });
    }
    Ok(Disaggregator::new(sc, env)?.interpolate(lambdas))
}

pub fn check_feasibility(
    res: &DisaggregationResult,
    traj: &[f64],
    env: &EnvelopeSolution,
    sc: &Scenario,
) -> Result<FeasibilityReport, DisaggError> {
    Ok(Disaggregator::new(sc, env)?.check(res, traj))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorstViolation {
    pub sample: usize,
    #[serde(flatten)]
    pub violation: Violation,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationSummary {
    pub n_total: usize,
    pub n_feasible: usize,
    pub histogram: BTreeMap<String, usize>,
    pub worst: Vec<WorstViolation>,
}

const WORST_KEPT: usize = 10;

fn worst_order(a: &WorstViolation, b: &WorstViolation) -> std::cmp::Ordering {
    b.violation
        .magnitude
        .total_cmp(&a.violation.magnitude)
        .then(a.sample.cmp(&b.sample))
        .then(a.violation.family.cmp(&b.violation.family))
        .then(a.violation.element.cmp(&b.violation.element))
        .then(a.violation.step.cmp(&b.violation.step))
}

impl VerificationSummary {
    fn merge(mut self, other: Self) -> Self {
        self.n_total += other.n_total;
        self.n_feasible += other.n_feasible;
        for (k, c) in other.histogram {
            *self.histogram.entry(k).or_default() += c;
        }
        self.worst.extend(other.worst);
        self.worst.sort_by(worst_order);
        self.worst.truncate(WORST_KEPT);
        self
    }

    fn single(sample: usize, rep: &FeasibilityReport) -> Self {
        let mut s = Self {
            n_total: 1,
            n_feasible: rep.feasible as usize,
            ..Default::default()
        };
        for v in &rep.violations {
            *s.histogram.entry(v.family.to_string()).or_default() += 1;
            s.worst.push(WorstViolation {
                sample,
                violation: v.clone(),
            });
        }
        s.worst.sort_by(worst_order);
        s.worst.truncate(WORST_KEPT);
        s
    }

    pub fn all_feasible(&self) -> bool {
        self.n_feasible == self.n_total
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serialization cannot fail")
    }
}

/// Per-sample outcome, for plotting.
#[derive(Clone, Debug)]
pub struct SampleOutcome {
    pub sample: TrajectorySample,
    pub feasible: bool,
}

/// Samples trajectories inside the envelope and checks each disaggregation.
/// Samples are evaluated in parallel; the reduction is order-independent.
pub fn monte_carlo_verify(
    env: &EnvelopeSolution,
    sc: &Scenario,
    cfg: &SamplerConfig,
) -> Result<(VerificationSummary, Vec<SampleOutcome>), DisaggError> {
    let d = Disaggregator::new(sc, env)?;
    let samples = sample_trajectories(env, cfg);
    let results: Vec<(VerificationSummary, bool)> = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let (_, rep) = d.run(&s.values)?;
            Ok((VerificationSummary::single(i, &rep), rep.feasible))
        })
        .collect::<Result<_, DisaggError>>()?;
    let mut summary = VerificationSummary::default();
    let mut outcomes = Vec::with_capacity(samples.len());
    for ((s, ok), sample) in results.into_iter().zip(samples) {
        summary = summary.merge(s);
        outcomes.push(SampleOutcome { sample, feasible: ok });
    }
    Ok((summary, outcomes))
}

/// `sample,kind,feasible,t1..tT` rows.
pub fn samples_csv(outcomes: &[SampleOutcome], steps: usize) -> String {
    let mut out = String::from("sample,kind,feasible");
    for t in 1..=steps {
        out.push_str(&format!(",t{t}"));
    }
    out.push('\n');
    for (i, o) in outcomes.iter().enumerate() {
        out.push_str(&format!("{},{},{}", i, o.sample.kind, o.feasible as u8));
        for v in &o.sample.values {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}
