//! Parameter studies. A failing grid point is recorded in its row and the
//! study continues.

use flexenv_core::envelope::{solve_envelope, EnvelopeKind, EnvelopeOptions, EnvelopeSolution};
use flexenv_core::lp::LpSolver;
use flexenv_core::netmodel::{Scenario, UncertaintySpec};
use rayon::prelude::*;

#[derive(Clone, Debug, PartialEq)]
pub struct PointResult {
    pub value: f64,
    pub baseline: Result<EnvelopeSolution, String>,
    pub preramp: Result<EnvelopeSolution, String>,
}

impl PointResult {
    pub fn area_baseline(&self) -> Option<f64> {
        self.baseline.as_ref().ok().map(|e| e.area_kwh)
    }

    pub fn area_preramp(&self) -> Option<f64> {
        self.preramp.as_ref().ok().map(|e| e.area_kwh)
    }

    /// Relative area gain of pre-ramping over the baseline, in percent.
    pub fn improvement_pct(&self) -> Option<f64> {
        let (b, p) = (self.area_baseline()?, self.area_preramp()?);
        (b > 0.0).then(|| 100.0 * (p - b) / b)
    }

    fn error(&self) -> String {
        [&self.baseline, &self.preramp]
            .iter()
            .filter_map(|r| r.as_ref().err().cloned())
            .collect::<Vec<_>>()
            .join("; ")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepKind {
    EssScale,
    Alpha,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub points: Vec<PointResult>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn extremes(r: &Result<EnvelopeSolution, String>) -> (Option<f64>, Option<f64>) {
    match r {
        Ok(e) => {
            let (lo, hi) = e.voltage_extremes();
            (Some(lo), Some(hi))
        }
        Err(_) => (None, None),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self.kind {
            SweepKind::EssScale => {
                out.push_str("ess_scale,area_baseline,area_preramp,improvement_pct,error\n");
                for p in &self.points {
                    out.push_str(&format!(
                        "{},{},{},{},{}\n",
                        p.value,
                        opt(p.area_baseline()),
                        opt(p.area_preramp()),
                        opt(p.improvement_pct()),
                        csv_field(&p.error())
                    ));
                }
            }
            SweepKind::Alpha => {
                out.push_str(
                    "alpha,area_baseline,area_preramp,vmin_baseline,vmax_baseline,vmin_preramp,vmax_preramp,error\n",
                );
                for p in &self.points {
                    let (bl, bh) = extremes(&p.baseline);
                    let (pl, ph) = extremes(&p.preramp);
                    out.push_str(&format!(
                        "{},{},{},{},{},{},{},{}\n",
                        p.value,
                        opt(p.area_baseline()),
                        opt(p.area_preramp()),
                        opt(bl),
                        opt(bh),
                        opt(pl),
                        opt(ph),
                        csv_field(&p.error())
                    ));
                }
            }
        }
        out
    }
}

fn both(sc: &Scenario, opts: &EnvelopeOptions, solver: &dyn LpSolver, value: f64) -> PointResult {
    let run = |kind| {
        solve_envelope(sc, &opts.with_kind(kind), solver).map_err(|e| {
            log::warn!("sweep point {value}: {} failed: {e}", kind.name());
            e.to_string()
        })
    };
    PointResult {
        value,
        baseline: run(EnvelopeKind::Baseline),
        preramp: run(EnvelopeKind::PreRamp),
    }
}

/// Scales every storage's power and energy ratings by each grid value.
pub fn ess_scale(sc: &Scenario, opts: &EnvelopeOptions, grid: &[f64], solver: &dyn LpSolver) -> SweepResult {
    let points = grid
        .par_iter()
        .map(|&f| both(&sc.with_storage_scaled(f), opts, solver, f))
        .collect();
    SweepResult {
        kind: SweepKind::EssScale,
        points,
    }
}

/// Sets load and PV forecast error α = β to each grid value.
pub fn alpha(sc: &Scenario, opts: &EnvelopeOptions, grid: &[f64], solver: &dyn LpSolver) -> SweepResult {
    let points = grid
        .par_iter()
        .map(|&a| {
            let mut o = opts.clone();
            o.uncertainty = UncertaintySpec {
                alpha: a,
                beta: a,
                ..opts.uncertainty
            };
            both(sc, &o, solver, a)
        })
        .collect();
    SweepResult {
        kind: SweepKind::Alpha,
        points,
    }
}
