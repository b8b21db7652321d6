//! Row assembly shared by the envelope and market models.
//!
//! Every device quantity that is affine in the decision variables (injections,
//! voltages, SoC, GCP power) is kept as a [`LinExpr`] and never becomes an LP
//! variable of its own.

use flexenv_lp::{Direction, LinExpr, LpModel, LpSolution, Sense, VarRef};

use super::{EnvelopeError, EnvelopeKind, EnvelopeOptions, SocMode};
use crate::netmodel::{
    sensitivity_matrices, uncertainty_margins, Generator, RobustMargins, Scenario,
    SensitivityMatrices, Storage,
};

/// Device power expressions for one trajectory, indexed `[device][step]`.
#[derive(Clone, Debug, Default)]
pub struct Points {
    pub pg: Vec<Vec<LinExpr>>,
    pub qg: Vec<Vec<LinExpr>>,
    pub pe: Vec<Vec<LinExpr>>,
}

impl Points {
    pub fn eval(&self, sol: &LpSolution) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let ev = |m: &Vec<Vec<LinExpr>>| -> Vec<Vec<f64>> {
            m.iter()
                .map(|row| row.iter().map(|e| sol.eval(e)).collect())
                .collect()
        };
        (ev(&self.pg), ev(&self.qg), ev(&self.pe))
    }
}

/// Plain LP variables of one trajectory.
#[derive(Clone, Debug, Default)]
pub struct PointVars {
    pub pg: Vec<Vec<VarRef>>,
    pub qg: Vec<Vec<VarRef>>,
    pub pe: Vec<Vec<VarRef>>,
}

impl PointVars {
    pub fn points(&self) -> Points {
        let lift = |m: &Vec<Vec<VarRef>>| -> Vec<Vec<LinExpr>> {
            m.iter()
                .map(|row| row.iter().map(|&v| LinExpr::from(v)).collect())
                .collect()
        };
        Points {
            pg: lift(&self.pg),
            qg: lift(&self.qg),
            pe: lift(&self.pe),
        }
    }
}

/// Pre-ramp magnitudes, `[device][step]`, all nonnegative.
#[derive(Clone, Debug, Default)]
pub struct PreVars {
    pub g_up: Vec<Vec<VarRef>>,
    pub g_dn: Vec<Vec<VarRef>>,
    pub e_up: Vec<Vec<VarRef>>,
    pub e_dn: Vec<Vec<VarRef>>,
}

pub struct EnvelopeBuilder<'a> {
    pub sc: &'a Scenario,
    pub opts: EnvelopeOptions,
    pub sens: SensitivityMatrices,
    pub margins: RobustMargins,
    pub model: LpModel,
    pub up: PointVars,
    pub dn: PointVars,
    pub pre: Option<PreVars>,
}

impl<'a> EnvelopeBuilder<'a> {
    pub fn new(sc: &'a Scenario, opts: &EnvelopeOptions, direction: Direction) -> Result<Self, EnvelopeError> {
        let mut sens = sensitivity_matrices(&sc.network)?;
        if opts.factor2 {
            sens = sens.doubled();
        }
        let margins = uncertainty_margins(&sens, &sc.profiles, &opts.uncertainty)?;
        margins.check_band(&sc.network)?;
        let mut b = Self {
            sc,
            opts: opts.clone(),
            sens,
            margins,
            model: LpModel::new(direction),
            up: PointVars::default(),
            dn: PointVars::default(),
            pre: None,
        };
        let ramped = opts.kind != EnvelopeKind::NoRamp;
        b.up = b.device_vars(ramped)?;
        b.dn = b.device_vars(ramped)?;
        if opts.kind == EnvelopeKind::PreRamp {
            b.pre = Some(b.pre_vars()?);
        }
        Ok(b)
    }

    pub fn steps(&self) -> usize {
        self.sc.steps()
    }

    /// A full set of device variables with physical bounds. With `ramped`, the
    /// ramp window around `p_init` is folded into the first-step bounds.
    pub fn device_vars(&mut self, ramped: bool) -> Result<PointVars, EnvelopeError> {
        let n_t = self.steps();
        let mut pv = PointVars::default();
        for g in &self.sc.generators {
            let mut row = Vec::with_capacity(n_t);
            let mut qrow = Vec::with_capacity(n_t);
            for t in 0..n_t {
                let (lo, hi) = if t == 0 && ramped && self.opts.initial_ramp {
                    first_step_window(g)
                } else {
                    (g.p_min, g.p_max)
                };
                row.push(self.model.add_variable(lo, hi)?);
                qrow.push(self.model.add_variable(g.q_min, g.q_max)?);
            }
            pv.pg.push(row);
            pv.qg.push(qrow);
        }
        for e in &self.sc.storages {
            let mut row = Vec::with_capacity(n_t);
            for _ in 0..n_t {
                row.push(self.model.add_variable(-e.p_max, e.p_max)?);
            }
            pv.pe.push(row);
        }
        Ok(pv)
    }

    fn pre_vars(&mut self) -> Result<PreVars, EnvelopeError> {
        let n_t = self.steps();
        let mut pre = PreVars::default();
        let gens: Vec<f64> = self.sc.generators.iter().map(|g| g.p_max - g.p_min).collect();
        let ess: Vec<f64> = self.sc.storages.iter().map(|e| 2.0 * e.p_max).collect();
        for &cap in &gens {
            pre.g_up.push(self.var_series(n_t, 0.0, cap)?);
            pre.g_dn.push(self.var_series(n_t, 0.0, cap)?);
        }
        for &cap in &ess {
            pre.e_up.push(self.var_series(n_t, 0.0, cap)?);
            pre.e_dn.push(self.var_series(n_t, 0.0, cap)?);
        }
        Ok(pre)
    }

    fn var_series(&mut self, n: usize, lo: f64, hi: f64) -> Result<Vec<VarRef>, EnvelopeError> {
        (0..n)
            .map(|_| self.model.add_variable(lo, hi).map_err(EnvelopeError::from))
            .collect()
    }

    /// Pre-ramped points: generators move toward the middle, storage away.
    pub fn pre_points(&self) -> Option<(Points, Points)> {
        let pre = self.pre.as_ref()?;
        let mut up = self.up.points();
        let mut dn = self.dn.points();
        for g in 0..self.sc.generators.len() {
            for t in 0..self.steps() {
                up.pg[g][t] -= pre.g_up[g][t];
                dn.pg[g][t] += pre.g_dn[g][t];
            }
        }
        for e in 0..self.sc.storages.len() {
            for t in 0..self.steps() {
                up.pe[e][t] += pre.e_up[e][t];
                dn.pe[e][t] -= pre.e_dn[e][t];
            }
        }
        Some((up, dn))
    }

    /// Adds every row of the envelope model of the configured kind.
    pub fn add_envelope_rows(&mut self) -> Result<(), EnvelopeError> {
        for g in 0..self.sc.generators.len() {
            self.add_generator_constraints(g)?;
        }
        for e in 0..self.sc.storages.len() {
            self.add_storage_constraints(e)?;
        }
        self.add_network_constraints()?;
        self.add_gcp_constraints()?;
        Ok(())
    }

    pub fn add_generator_constraints(&mut self, gi: usize) -> Result<(), EnvelopeError> {
        let g = self.sc.generators[gi].clone();
        let n_t = self.steps();
        let (up, dn) = (self.up.pg[gi].clone(), self.dn.pg[gi].clone());
        for t in 0..n_t {
            self.model.add_constraint(up[t] - dn[t], Sense::Ge, 0.0)?;
        }
        match self.opts.kind {
            EnvelopeKind::NoRamp => {}
            EnvelopeKind::Baseline => {
                for t in 1..n_t {
                    for s in [&up, &dn] {
                        self.ramp_pair(&g, s[t - 1].into(), s[t].into())?;
                    }
                    self.model.add_constraint(up[t] - dn[t - 1], Sense::Le, g.ramp_up)?;
                    self.model.add_constraint(dn[t - 1] - up[t], Sense::Le, g.ramp_down)?;
                    self.model.add_constraint(dn[t] - up[t - 1], Sense::Le, g.ramp_up)?;
                    self.model.add_constraint(up[t - 1] - dn[t], Sense::Le, g.ramp_down)?;
                }
            }
            EnvelopeKind::PreRamp => {
                let pre = self.pre.as_ref().expect("pre-ramp vars");
                let (pu, pd) = (pre.g_up[gi].clone(), pre.g_dn[gi].clone());
                for t in 1..n_t {
                    for s in [&up, &dn] {
                        self.ramp_pair(&g, s[t - 1].into(), s[t].into())?;
                    }
                    // pre-ramped corners at t-1 against envelope corners at t
                    let dn_b = dn[t - 1] + pd[t - 1];
                    let up_b = up[t - 1] - pu[t - 1];
                    for prev in [&dn_b, &up_b] {
                        for cur in [up[t], dn[t]] {
                            self.ramp_pair(&g, prev.clone(), cur.into())?;
                        }
                    }
                }
                for t in 0..n_t {
                    self.model.add_constraint(dn[t] + pd[t], Sense::Le, g.p_max)?;
                    self.model.add_constraint(up[t] - pu[t], Sense::Ge, g.p_min)?;
                }
            }
        }
        Ok(())
    }

    /// `cur - prev <= R_up` and `prev - cur <= R_dn`.
    pub fn ramp_pair(&mut self, g: &Generator, prev: LinExpr, cur: LinExpr) -> Result<(), EnvelopeError> {
        self.model
            .add_constraint(cur.clone() - prev.clone(), Sense::Le, g.ramp_up)?;
        self.model.add_constraint(prev - cur, Sense::Le, g.ramp_down)?;
        Ok(())
    }

    pub fn add_storage_constraints(&mut self, ei: usize) -> Result<(), EnvelopeError> {
        let e = self.sc.storages[ei].clone();
        let n_t = self.steps();
        let dt = self.sc.dt();
        let (up, dn) = (self.up.pe[ei].clone(), self.dn.pe[ei].clone());
        for t in 0..n_t {
            self.model.add_constraint(up[t] - dn[t], Sense::Ge, 0.0)?;
        }
        let up_x: Vec<LinExpr> = up.iter().map(|&v| v.into()).collect();
        let dn_x: Vec<LinExpr> = dn.iter().map(|&v| v.into()).collect();
        add_soc_box(&mut self.model, &e, &up_x, dt)?;
        add_soc_box(&mut self.model, &e, &dn_x, dt)?;

        if self.opts.soc_mode == SocMode::Strict {
            for t in 1..n_t {
                // the up trajectory's SoC must not fall below what the down
                // trajectory would leave, and vice versa
                let e_up = soc_expr(&e, &up_x, t, dt);
                let e_dn = soc_expr(&e, &dn_x, t, dt);
                let cum_dn = cumulative(&e, &dn_x, t, dt);
                let cum_up = cumulative(&e, &up_x, t, dt);
                self.model.add_constraint(e_up - cum_dn, Sense::Ge, 0.0)?;
                self.model.add_constraint(e_dn - cum_up, Sense::Le, 0.0)?;
            }
        }

        if let Some(pre) = &self.pre {
            let (pu, pd) = (pre.e_up[ei].clone(), pre.e_dn[ei].clone());
            let mut budget_up = LinExpr::new();
            let mut budget_dn = LinExpr::new();
            for t in 0..n_t {
                budget_up.add_term(pu[t], dt);
                budget_dn.add_term(pd[t], dt);
                self.model.add_constraint(up[t] + pu[t], Sense::Le, e.p_max)?;
                self.model.add_constraint(dn[t] - pd[t], Sense::Ge, -e.p_max)?;
            }
            self.model.add_constraint(budget_up, Sense::Le, e.e_init - e.e_min)?;
            self.model.add_constraint(budget_dn, Sense::Le, e.e_max - e.e_init)?;
            let up_b: Vec<LinExpr> = (0..n_t).map(|t| up[t] + pu[t]).collect();
            let dn_b: Vec<LinExpr> = (0..n_t).map(|t| dn[t] - pd[t]).collect();
            add_soc_box(&mut self.model, &e, &up_b, dt)?;
            add_soc_box(&mut self.model, &e, &dn_b, dt)?;
        }
        Ok(())
    }

    pub fn add_network_constraints(&mut self) -> Result<(), EnvelopeError> {
        let up = self.up.points();
        let dn = self.dn.points();
        self.add_voltage_rows(&up)?;
        self.add_voltage_rows(&dn)?;
        if let Some((up_b, dn_b)) = self.pre_points() {
            self.add_voltage_rows(&up_b)?;
            self.add_voltage_rows(&dn_b)?;
        }
        Ok(())
    }

    /// Tightened squared-voltage box at every non-slack bus and step.
    pub fn add_voltage_rows(&mut self, pts: &Points) -> Result<(), EnvelopeError> {
        let net = &self.sc.network;
        for t in 0..self.steps() {
            let (p_inj, q_inj) = injections(self.sc, pts, t);
            for i in 0..self.sens.dim() {
                let mut dev = LinExpr::new();
                for j in 0..self.sens.dim() {
                    let (hp, hq) = (self.sens.h_p[(i, j)], self.sens.h_q[(i, j)]);
                    if hp != 0.0 {
                        dev.add_scaled(&p_inj[j + 1], hp);
                    }
                    if hq != 0.0 {
                        dev.add_scaled(&q_inj[j + 1], hq);
                    }
                }
                dev.normalize();
                // rows are S * (u - 1) = H * inj, in kW
                let s = self.sens.s_base_kva;
                let d = self.margins.delta_u[t][i];
                let hi = (net.u_max - d - 1.0) * s;
                let lo = (net.u_min + d - 1.0) * s;
                if dev.terms().is_empty() {
                    let base = dev.constant_part();
                    if base > hi + 1e-7 * s || base < lo - 1e-7 * s {
                        return Err(EnvelopeError::Infeasible(format!(
                            "bus {} at step {} violates its voltage band regardless of dispatch (u = {:.6})",
                            i + 2,
                            t + 1,
                            1.0 + base / s
                        )));
                    }
                    continue;
                }
                self.model.add_lazy_constraint(dev.clone(), Sense::Le, hi)?;
                self.model.add_lazy_constraint(dev, Sense::Ge, lo)?;
            }
        }
        Ok(())
    }

    pub fn add_gcp_constraints(&mut self) -> Result<(), EnvelopeError> {
        let up = self.up.points();
        let dn = self.dn.points();
        for t in 0..self.steps() {
            let gu = gcp_expr(self.sc, &up, t);
            let gd = gcp_expr(self.sc, &dn, t);
            self.model.add_constraint(gu - gd, Sense::Ge, 0.0)?;
        }
        if let Some((up_b, dn_b)) = self.pre_points() {
            let pre = self.pre.clone().expect("pre vars");
            for t in 0..self.steps() {
                for (a, b) in [(&up, &up_b), (&dn, &dn_b)] {
                    let diff = gcp_expr(self.sc, a, t) - gcp_expr(self.sc, b, t);
                    self.model.add_constraint(diff, Sense::Eq, 0.0)?;
                }
                for (g_side, e_side) in [(&pre.g_up, &pre.e_up), (&pre.g_dn, &pre.e_dn)] {
                    let mut bal = LinExpr::new();
                    for row in g_side {
                        bal.add_term(row[t], 1.0);
                    }
                    for row in e_side {
                        bal.add_term(row[t], -1.0);
                    }
                    if !bal.terms().is_empty() {
                        self.model.add_constraint(bal, Sense::Eq, 0.0)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Σ_t (gcp_up − gcp_dn) Δt.
    pub fn area_expr(&self) -> LinExpr {
        let up = self.up.points();
        let dn = self.dn.points();
        let mut obj = LinExpr::new();
        for t in 0..self.steps() {
            let w = gcp_expr(self.sc, &up, t) - gcp_expr(self.sc, &dn, t);
            obj.add_scaled(&w, self.sc.dt());
        }
        obj
    }
}

/// Generator bounds at the first step once the ramp from `p_init` is applied.
pub fn first_step_window(g: &Generator) -> (f64, f64) {
    let lo = g.p_min.max(g.p_init - g.ramp_down);
    let hi = g.p_max.min(g.p_init + g.ramp_up);
    (lo, hi)
}

/// SoC at 0-based step `t` (the energy before the power of step `t` flows).
pub fn soc_expr(e: &Storage, p: &[LinExpr], t: usize, dt: f64) -> LinExpr {
    let mut x = LinExpr::constant(e.e_init * e.kappa.powi(t as i32));
    for (tau, p_tau) in p.iter().enumerate().take(t) {
        x.add_scaled(p_tau, -dt * e.kappa.powi((t - 1 - tau) as i32));
    }
    x
}

/// `E_init − Δt Σ_{τ<t} p_τ`, with no decay.
pub fn cumulative(e: &Storage, p: &[LinExpr], t: usize, dt: f64) -> LinExpr {
    let mut x = LinExpr::constant(e.e_init);
    for p_tau in p.iter().take(t) {
        x.add_scaled(p_tau, -dt);
    }
    x
}

pub fn add_soc_box(model: &mut LpModel, e: &Storage, p: &[LinExpr], dt: f64) -> Result<(), EnvelopeError> {
    for t in 1..p.len() {
        let x = soc_expr(e, p, t, dt);
        model.add_lazy_constraint(x.clone(), Sense::Le, e.e_max)?;
        model.add_lazy_constraint(x, Sense::Ge, e.e_min)?;
    }
    Ok(())
}

/// Nodal injections in kW at step `t`, indexed by bus − 1.
pub fn injections(sc: &Scenario, pts: &Points, t: usize) -> (Vec<LinExpr>, Vec<LinExpr>) {
    let n = sc.network.num_buses();
    let prof = &sc.profiles;
    let mut p: Vec<LinExpr> = (0..n).map(|b| LinExpr::constant(prof.net_p(t, b))).collect();
    let mut q: Vec<LinExpr> = (0..n).map(|b| LinExpr::constant(-prof.load_q[t][b])).collect();
    for (gi, g) in sc.generators.iter().enumerate() {
        p[g.bus - 1] += pts.pg[gi][t].clone();
        q[g.bus - 1] += pts.qg[gi][t].clone();
    }
    for (ei, e) in sc.storages.iter().enumerate() {
        p[e.bus - 1] += pts.pe[ei][t].clone();
    }
    (p, q)
}

/// Net export at the GCP: the sum of all nodal active injections.
pub fn gcp_expr(sc: &Scenario, pts: &Points, t: usize) -> LinExpr {
    let mut x = LinExpr::constant((0..sc.network.num_buses()).map(|b| sc.profiles.net_p(t, b)).sum());
    for row in &pts.pg {
        x += row[t].clone();
    }
    for row in &pts.pe {
        x += row[t].clone();
    }
    x
}
