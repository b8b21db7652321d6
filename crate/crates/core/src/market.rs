//! Cost-optimal base schedule with reserve and flexible-ramping revenue.

use flexenv_lp::{Direction, LinExpr, LpSolver, Sense};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envelope::builder::{add_soc_box, gcp_expr, EnvelopeBuilder, Points};
use crate::envelope::{
    check_status, extract, EnvelopeError, EnvelopeKind, EnvelopeOptions, EnvelopeSolution,
};
use crate::netmodel::Scenario;

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("prices CSV line {line}: {msg}")]
    Prices { line: usize, msg: String },
    #[error("prices cover {got} steps, scenario has {expected}")]
    Length { expected: usize, got: usize },
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
}

impl From<flexenv_lp::LpError> for MarketError {
    fn from(e: flexenv_lp::LpError) -> Self {
        MarketError::Envelope(e.into())
    }
}

/// Per-step prices: energy in $/kWh at the GCP, reserve and FRP in $/kW.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketPrices {
    pub energy: Vec<f64>,
    pub reserve_up: Vec<f64>,
    pub reserve_dn: Vec<f64>,
    pub frp: Vec<f64>,
}

#[derive(Deserialize)]
struct PriceRow {
    t: usize,
    energy_per_kwh: f64,
    reserve_up_per_kw: f64,
    reserve_dn_per_kw: f64,
    frp_per_kw: f64,
}

impl MarketPrices {
    pub fn zeros(steps: usize) -> Self {
        Self {
            energy: vec![0.0; steps],
            reserve_up: vec![0.0; steps],
            reserve_dn: vec![0.0; steps],
            frp: vec![0.0; steps],
        }
    }

    pub fn len(&self) -> usize {
        self.energy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energy.is_empty()
    }

    /// Reads `t,energy_per_kwh,reserve_up_per_kw,reserve_dn_per_kw,frp_per_kw`.
    /// Rows must cover t = 1..T exactly once, in any order.
    pub fn from_csv(text: &str) -> Result<Self, MarketError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut rows: Vec<(usize, PriceRow)> = Vec::new();
        for rec in rdr.deserialize::<PriceRow>() {
            let row = rec.map_err(|e| MarketError::Prices {
                line: e.position().map(|p| p.line() as usize).unwrap_or(0),
                msg: e.to_string(),
            })?;
            let line = rows.len() + 2;
            let vals = [row.energy_per_kwh, row.reserve_up_per_kw, row.reserve_dn_per_kw, row.frp_per_kw];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(MarketError::Prices {
                    line,
                    msg: "non-finite price".into(),
                });
            }
            rows.push((line, row));
        }
        let n = rows.len();
        let mut p = Self::zeros(n);
        let mut seen = vec![false; n];
        for (line, r) in rows {
            if r.t == 0 || r.t > n || seen[r.t - 1] {
                return Err(MarketError::Prices {
                    line,
                    msg: format!("step {} missing, duplicated or out of range 1..={}", r.t, n),
                });
            }
            seen[r.t - 1] = true;
            let i = r.t - 1;
            p.energy[i] = r.energy_per_kwh;
            p.reserve_up[i] = r.reserve_up_per_kw;
            p.reserve_dn[i] = r.reserve_dn_per_kw;
            p.frp[i] = r.frp_per_kw;
        }
        Ok(p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketSolution {
    pub base: Vec<f64>,
    pub base_gen: Vec<Vec<f64>>,
    pub base_ess: Vec<Vec<f64>>,
    pub env: EnvelopeSolution,
    pub r_cap_up: Vec<f64>,
    pub r_cap_dn: Vec<f64>,
    /// Defined for steps 1..T−1.
    pub r_frp_up: Vec<f64>,
    pub r_frp_dn: Vec<f64>,
    pub cost_energy: f64,
    pub rev_reserve: f64,
    pub rev_frp: f64,
    pub objective: f64,
}

impl MarketSolution {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("market serialization cannot fail")
    }

    pub fn revenue(&self) -> f64 {
        self.rev_reserve + self.rev_frp
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarketOptions {
    /// Constrain both FRP quantities to be nonnegative. With large hourly
    /// net-load swings these rows can make the schedule infeasible; without
    /// them a negative quantity is priced as a charge.
    pub frp_nonnegative: bool,
}

impl Default for MarketOptions {
    fn default() -> Self {
        Self {
            frp_nonnegative: true,
        }
    }
}

/// `(gcp_up − base, base − gcp_dn)` per step.
pub fn reserve_capacities(base: &[f64], env: &EnvelopeSolution) -> (Vec<f64>, Vec<f64>) {
    let up = env.gcp_up.iter().zip(base).map(|(u, b)| u - b).collect();
    let dn = base.iter().zip(&env.gcp_dn).map(|(b, d)| b - d).collect();
    (up, dn)
}

/// `(gcp_up[t+1] − base[t], base[t] − gcp_dn[t+1])` for t = 1..T−1.
pub fn frp_quantities(base: &[f64], env: &EnvelopeSolution) -> (Vec<f64>, Vec<f64>) {
    let n = base.len().saturating_sub(1);
    let up = (0..n).map(|t| env.gcp_up[t + 1] - base[t]).collect();
    let dn = (0..n).map(|t| base[t] - env.gcp_dn[t + 1]).collect();
    (up, dn)
}

/// Minimizes energy cost minus reserve and FRP revenue over a base schedule
/// and an envelope of the configured kind, solved jointly.
pub fn solve_market(
    sc: &Scenario,
    prices: &MarketPrices,
    opts: &EnvelopeOptions,
    mopts: &MarketOptions,
    solver: &dyn LpSolver,
) -> Result<MarketSolution, MarketError> {
    let n_t = sc.steps();
    if prices.len() != n_t {
        return Err(MarketError::Length {
            expected: n_t,
            got: prices.len(),
        });
    }
    let dt = sc.dt();
    let mut b = EnvelopeBuilder::new(sc, opts, Direction::Minimize)?;
    b.add_envelope_rows()?;

    // base schedule: physical limits and ramps only, no envelope containment
    // at device level
    let base_vars = b.device_vars(true)?;
    let base = base_vars.points();
    for (gi, g) in sc.generators.iter().enumerate() {
        let p = &base_vars.pg[gi];
        for t in 1..n_t {
            b.ramp_pair(g, p[t - 1].into(), p[t].into())?;
            if opts.kind == EnvelopeKind::NoRamp {
                continue;
            }
            // every envelope corner at t is reachable from the base at t-1
            for corner in [b.up.pg[gi][t], b.dn.pg[gi][t]] {
                b.ramp_pair(g, p[t - 1].into(), corner.into())?;
            }
        }
    }
    for (ei, e) in sc.storages.iter().enumerate() {
        add_soc_box(&mut b.model, e, &base.pe[ei], dt).map_err(MarketError::from)?;
    }
    b.add_voltage_rows(&base)?;

    let up: Points = b.up.points();
    let dn: Points = b.dn.points();
    let g_up: Vec<LinExpr> = (0..n_t).map(|t| gcp_expr(sc, &up, t)).collect();
    let g_dn: Vec<LinExpr> = (0..n_t).map(|t| gcp_expr(sc, &dn, t)).collect();
    let g_base: Vec<LinExpr> = (0..n_t).map(|t| gcp_expr(sc, &base, t)).collect();
    for t in 0..n_t {
        b.model.add_constraint(g_up[t].clone() - g_base[t].clone(), Sense::Ge, 0.0)?;
        b.model.add_constraint(g_base[t].clone() - g_dn[t].clone(), Sense::Ge, 0.0)?;
    }
    let frp_rows = if mopts.frp_nonnegative { n_t.saturating_sub(1) } else { 0 };
    for t in 0..frp_rows {
        b.model.add_constraint(g_up[t + 1].clone() - g_base[t].clone(), Sense::Ge, 0.0)?;
        b.model.add_constraint(g_base[t].clone() - g_dn[t + 1].clone(), Sense::Ge, 0.0)?;
    }

    let mut energy = LinExpr::new();
    for t in 0..n_t {
        energy.add_scaled(&g_base[t], -prices.energy[t] * dt);
        for (gi, g) in sc.generators.iter().enumerate() {
            energy.add_term(base_vars.pg[gi][t], g.marginal_cost * dt);
        }
    }
    let mut reserve = LinExpr::new();
    for t in 0..n_t {
        reserve.add_scaled(&(g_up[t].clone() - g_base[t].clone()), prices.reserve_up[t]);
        reserve.add_scaled(&(g_base[t].clone() - g_dn[t].clone()), prices.reserve_dn[t]);
    }
    let mut frp = LinExpr::new();
    for t in 0..n_t.saturating_sub(1) {
        frp.add_scaled(&(g_up[t + 1].clone() - g_base[t].clone()), prices.frp[t]);
        frp.add_scaled(&(g_base[t].clone() - g_dn[t + 1].clone()), prices.frp[t]);
    }
    let objective = energy.clone() - reserve.clone() - frp.clone();
    b.model.set_objective(Direction::Minimize, objective)?;
    log::info!(
        "{} market: {} variables, {} rows",
        opts.kind.name(),
        b.model.num_variables(),
        b.model.num_constraints()
    );
    let sol = solver.solve(&b.model).map_err(EnvelopeError::from)?;
    check_status(&sol, "market schedule").map_err(|e| match e {
        EnvelopeError::Infeasible(msg) if mopts.frp_nonnegative => EnvelopeError::Infeasible(format!(
            "{msg} (nonnegative FRP needs every hourly net-load change to fit inside the envelope; \
             relax with signed FRP quantities)"
        )),
        e => e,
    })?;

    let env = extract(&b, &sol, &solver.name());
    let base_gcp: Vec<f64> = g_base.iter().map(|e| sol.eval(e)).collect();
    let (base_gen, _, base_ess) = base.eval(&sol);
    let (r_cap_up, r_cap_dn) = reserve_capacities(&base_gcp, &env);
    let (r_frp_up, r_frp_dn) = frp_quantities(&base_gcp, &env);
    let cost_energy = sol.eval(&energy);
    let rev_reserve = sol.eval(&reserve);
    let rev_frp = sol.eval(&frp);
    Ok(MarketSolution {
        base: base_gcp,
        base_gen,
        base_ess,
        env,
        r_cap_up,
        r_cap_dn,
        r_frp_up,
        r_frp_dn,
        cost_energy,
        rev_reserve,
        rev_frp,
        objective: cost_energy - rev_reserve - rev_frp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;
    use flexenv_lp::SimplexSolver;

    #[test]
    fn reserve_and_frp_formulas() {
        let sc = assets::toy_scenario();
        let mut env = crate::envelope::solve_envelope(
            &sc,
            &EnvelopeOptions::new(EnvelopeKind::NoRamp),
            &SimplexSolver::default(),
        )
        .unwrap();
        env.gcp_up = vec![10.0, 12.0];
        env.gcp_dn = vec![1.0, 2.0];
        assert_eq!(reserve_capacities(&[4.0, 7.0], &env), (vec![6.0, 5.0], vec![3.0, 5.0]));
        assert_eq!(reserve_capacities(&[10.0, 12.0], &env).0, vec![0.0, 0.0]);
        assert_eq!(frp_quantities(&[5.0, 0.0], &env), (vec![7.0], vec![3.0]));
    }

    #[test]
    fn zero_prices_give_zero_objective() {
        let sc = assets::toy_scenario();
        let s = solve_market(
            &sc,
            &MarketPrices::zeros(2),
            &EnvelopeOptions::new(EnvelopeKind::Baseline),
            &MarketOptions::default(),
            &SimplexSolver::default(),
        )
        .unwrap();
        assert_eq!(s.objective, 0.0);
        assert_eq!(s.r_frp_up.len(), 1);
    }

    #[test]
    fn prices_csv() {
        let p = MarketPrices::from_csv(
            "t,energy_per_kwh,reserve_up_per_kw,reserve_dn_per_kw,frp_per_kw\n2,0.5,0.02,0.02,0.01\n1,0.4,0.02,0.02,0.01\n",
        )
        .unwrap();
        assert_eq!(p.energy, vec![0.4, 0.5]);
        assert!(MarketPrices::from_csv("t,energy_per_kwh,reserve_up_per_kw,reserve_dn_per_kw,frp_per_kw\n1,1,1,1,1\n1,1,1,1,1\n").is_err());
        assert!(MarketPrices::from_csv("t,energy\n1,1\n").is_err());
    }
}
