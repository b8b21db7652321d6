//! Bounded-variable revised simplex.
//!
//! The working problem is `min c'x` over structural columns, one slack per
//! active row (`a_i x + s_i = b_i`) and, where a row starts infeasible, one
//! artificial column. The basis inverse is kept dense and updated by rank-one
//! pivots, with a periodic refactorization that exploits the unit slack and
//! artificial columns. Rows flagged lazy are appended to the working problem
//! only when an intermediate optimum violates them; appending a row keeps the
//! current basis (its slack becomes basic) so the solve continues from there.

use log::{debug, warn};

use crate::error::LpError;
use crate::model::{Direction, LpModel, LpSolution, LpStatus, Sense};
use crate::LpSolver;

#[derive(Clone, Debug)]
pub struct SimplexOptions {
    /// Primal feasibility tolerance on scaled rows and bounds.
    pub feasibility_tol: f64,
    /// Smallest pivot element magnitude accepted in the ratio test.
    pub pivot_tol: f64,
    /// Reduced-cost tolerance for optimality.
    pub optimality_tol: f64,
    /// Total pivot cap across all phases and row-generation rounds.
    pub max_iterations: usize,
    /// Pivots between refactorizations of the basis inverse.
    pub refactor_interval: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degenerate_switch: usize,
    /// Power-of-two row and column equilibration.
    pub scaling: bool,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-7,
            pivot_tol: 1e-9,
            optimality_tol: 1e-9,
            max_iterations: 1_000_000,
            refactor_interval: 150,
            degenerate_switch: 50,
            scaling: true,
        }
    }
}

/// The bundled solver.
#[derive(Clone, Debug, Default)]
pub struct SimplexSolver {
    pub options: SimplexOptions,
}

impl SimplexSolver {
    pub fn new(options: SimplexOptions) -> Self {
        Self { options }
    }
}

impl LpSolver for SimplexSolver {
    fn solve(&self, model: &LpModel) -> Result<LpSolution, LpError> {
        solve(model, &self.options)
    }

    fn name(&self) -> String {
        "bundled-simplex".to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Status {
    Basic(usize),
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Free,
    /// Slack or artificial of a row that is not in the working problem.
    Inactive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

/// Candidate row after presolve, in scaled units.
struct Row {
    terms: Vec<(usize, f64)>,
    sense: Sense,
    rhs: f64,
    lazy: bool,
}

struct Work<'a> {
    opts: &'a SimplexOptions,
    n: usize,
    rows: Vec<Row>,
    // column ids: structural [0, n), slack n + k, artificial n + nrows + k
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    status: Vec<Status>,
    cost2: Vec<f64>,
    // structural columns restricted to active rows: (row position, value)
    cols: Vec<Vec<(usize, f64)>>,
    art_sign: Vec<f64>,
    slot_of_pos: Vec<usize>,
    pos_of_slot: Vec<Option<usize>>,
    basis: Vec<usize>,
    binv: Vec<Vec<f64>>,
    iterations: usize,
    since_refactor: usize,
    degenerate_run: usize,
}

pub fn solve(model: &LpModel, opts: &SimplexOptions) -> Result<LpSolution, LpError> {
    let n = model.num_variables();
    if n == 0 {
        return Err(LpError::EmptyModel);
    }
    let infeasible = |iterations| LpSolution {
        status: LpStatus::Infeasible,
        objective_value: f64::NAN,
        primal: vec![0.0; n],
        iterations,
    };

    // Presolve: singleton rows become bounds, empty rows are checked directly.
    let mut lower: Vec<f64> = model.vars.iter().map(|v| v.lower).collect();
    let mut upper: Vec<f64> = model.vars.iter().map(|v| v.upper).collect();
    let mut rows: Vec<Row> = Vec::new();
    for c in &model.constraints {
        match c.terms.len() {
            0 => {
                let ok = match c.sense {
                    Sense::Le => 0.0 <= c.rhs + opts.feasibility_tol,
                    Sense::Ge => 0.0 >= c.rhs - opts.feasibility_tol,
                    Sense::Eq => c.rhs.abs() <= opts.feasibility_tol,
                };
                if !ok {
                    return Ok(infeasible(0));
                }
            }
            1 => {
                let (j, a) = c.terms[0];
                let v = c.rhs / a;
                let (tighten_upper, tighten_lower) = match (c.sense, a > 0.0) {
                    (Sense::Eq, _) => (true, true),
                    (Sense::Le, true) | (Sense::Ge, false) => (true, false),
                    _ => (false, true),
                };
                if tighten_upper && v < upper[j] {
                    upper[j] = v;
                }
                if tighten_lower && v > lower[j] {
                    lower[j] = v;
                }
            }
            _ => rows.push(Row {
                terms: c.terms.clone(),
                sense: c.sense,
                rhs: c.rhs,
                lazy: c.lazy,
            }),
        }
    }
    for j in 0..n {
        if lower[j] > upper[j] {
            let scale = 1.0 + lower[j].abs().max(upper[j].abs());
            if lower[j] - upper[j] <= opts.feasibility_tol * scale {
                let mid = 0.5 * (lower[j] + upper[j]);
                lower[j] = mid;
                upper[j] = mid;
            } else {
                return Ok(infeasible(0));
            }
        }
    }

    // Minimization costs.
    let sign = match model.direction {
        Direction::Maximize => -1.0,
        Direction::Minimize => 1.0,
    };
    let mut cost = vec![0.0; n];
    for &(j, c) in &model.objective {
        cost[j] += sign * c;
    }

    // Equilibration with powers of two so that scaling is exact.
    let mut col_scale = vec![1.0; n];
    if opts.scaling {
        for row in &mut rows {
            let m = row.terms.iter().fold(0.0f64, |acc, &(_, a)| acc.max(a.abs()));
            if m > 0.0 {
                let r = pow2(1.0 / m);
                for t in &mut row.terms {
                    t.1 *= r;
                }
                row.rhs *= r;
            }
        }
        let mut colmax = vec![0.0f64; n];
        for row in &rows {
            for &(j, a) in &row.terms {
                colmax[j] = colmax[j].max(a.abs());
            }
        }
        for j in 0..n {
            if colmax[j] > 0.0 {
                col_scale[j] = pow2(1.0 / colmax[j]);
            }
        }
        for row in &mut rows {
            for t in &mut row.terms {
                t.1 *= col_scale[t.0];
            }
        }
        for j in 0..n {
            lower[j] /= col_scale[j];
            upper[j] /= col_scale[j];
            cost[j] *= col_scale[j];
        }
        let cmax = cost.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
        if cmax > 0.0 {
            let s = pow2(1.0 / cmax);
            for c in &mut cost {
                *c *= s;
            }
        }
    }

    let mut work = Work::new(opts, n, rows, lower, upper, cost);
    let status = work.run()?;

    let scaled = &work.x[..n];
    let primal: Vec<f64> = scaled.iter().zip(&col_scale).map(|(v, s)| v * s).collect();
    let objective_value = model.objective_at(&primal);
    if status == LpStatus::Optimal {
        let viol = model.max_violation(&primal);
        if viol > 1e3 * opts.feasibility_tol {
            warn!("simplex optimum violates model rows by {viol:e}");
        }
    }
    debug!(
        "simplex: {status:?} after {} pivots, {} of {} rows active",
        work.iterations,
        work.basis.len(),
        work.rows.len()
    );
    Ok(match status {
        LpStatus::Infeasible => infeasible(work.iterations),
        _ => LpSolution {
            status,
            objective_value,
            primal,
            iterations: work.iterations,
        },
    })
}

fn pow2(v: f64) -> f64 {
    2f64.powi(v.log2().round() as i32)
}

impl<'a> Work<'a> {
    fn new(
        opts: &'a SimplexOptions,
        n: usize,
        rows: Vec<Row>,
        mut lower: Vec<f64>,
        mut upper: Vec<f64>,
        cost: Vec<f64>,
    ) -> Self {
        let nrows = rows.len();
        let total = n + 2 * nrows;
        let mut x = vec![0.0; total];
        let mut status = vec![Status::Inactive; total];
        for j in 0..n {
            if lower[j].is_finite() {
                x[j] = lower[j];
                status[j] = Status::AtLower;
            } else if upper[j].is_finite() {
                x[j] = upper[j];
                status[j] = Status::AtUpper;
            } else {
                status[j] = Status::Free;
            }
        }
        for row in &rows {
            let (l, u) = match row.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lower.push(l);
            upper.push(u);
        }
        lower.extend(std::iter::repeat(0.0).take(nrows));
        upper.extend(std::iter::repeat(0.0).take(nrows));
        let mut cost2 = cost;
        cost2.resize(total, 0.0);
        Self {
            opts,
            n,
            rows,
            lower,
            upper,
            x,
            status,
            cost2,
            cols: vec![Vec::new(); n],
            art_sign: vec![1.0; nrows],
            slot_of_pos: Vec::new(),
            pos_of_slot: vec![None; nrows],
            basis: Vec::new(),
            binv: Vec::new(),
            iterations: 0,
            since_refactor: 0,
            degenerate_run: 0,
        }
    }

    fn nrows(&self) -> usize {
        self.rows.len()
    }

    fn slack(&self, slot: usize) -> usize {
        self.n + slot
    }

    fn artificial(&self, slot: usize) -> usize {
        self.n + self.nrows() + slot
    }

    fn run(&mut self) -> Result<LpStatus, LpError> {
        let initial: Vec<usize> = (0..self.nrows()).filter(|&k| !self.rows[k].lazy).collect();
        self.add_rows(&initial);
        loop {
            if self.needs_phase_one() {
                match self.iterate(Phase::One)? {
                    PhaseOutcome::IterationLimit => return Ok(LpStatus::IterationLimit),
                    PhaseOutcome::Unbounded => unreachable!("phase one is bounded below"),
                    PhaseOutcome::Optimal => {}
                }
                let infeas: f64 = (0..self.nrows())
                    .filter(|&k| matches!(self.status[self.artificial(k)], Status::Basic(_)))
                    .map(|k| self.x[self.artificial(k)].abs())
                    .sum();
                if infeas > self.opts.feasibility_tol {
                    return Ok(LpStatus::Infeasible);
                }
                // Remaining basic artificials are pinned at zero.
                for k in 0..self.nrows() {
                    let a = self.artificial(k);
                    self.upper[a] = 0.0;
                }
            }
            let outcome = self.iterate(Phase::Two)?;
            let pending: Vec<usize> = (0..self.nrows())
                .filter(|&k| self.pos_of_slot[k].is_none())
                .collect();
            match outcome {
                PhaseOutcome::IterationLimit => return Ok(LpStatus::IterationLimit),
                PhaseOutcome::Unbounded => {
                    if pending.is_empty() {
                        return Ok(LpStatus::Unbounded);
                    }
                    self.add_rows(&pending);
                }
                PhaseOutcome::Optimal => {
                    let violated: Vec<usize> = pending
                        .into_iter()
                        .filter(|&k| self.row_violation(k) > self.opts.feasibility_tol)
                        .collect();
                    if violated.is_empty() {
                        self.clamp_basics();
                        return Ok(LpStatus::Optimal);
                    }
                    debug!("row generation: adding {} violated rows", violated.len());
                    self.add_rows(&violated);
                }
            }
        }
    }

    fn row_violation(&self, k: usize) -> f64 {
        let row = &self.rows[k];
        let act: f64 = row.terms.iter().map(|&(j, a)| a * self.x[j]).sum();
        match row.sense {
            Sense::Le => act - row.rhs,
            Sense::Ge => row.rhs - act,
            Sense::Eq => (act - row.rhs).abs(),
        }
    }

    fn needs_phase_one(&self) -> bool {
        (0..self.nrows()).any(|k| {
            let a = self.artificial(k);
            matches!(self.status[a], Status::Basic(_)) && self.x[a] > 0.0
        })
    }

    /// Appends rows to the working problem with their slacks basic. Rows whose
    /// slack would violate its bounds get an artificial column in its place.
    fn add_rows(&mut self, slots: &[usize]) {
        for &k in slots {
            let pos = self.basis.len();
            self.pos_of_slot[k] = Some(pos);
            self.slot_of_pos.push(k);
            let terms = self.rows[k].terms.clone();
            for &(j, a) in &terms {
                self.cols[j].push((pos, a));
            }
            // New inverse row is -a_B * Binv followed by 1.
            let mut new_row = vec![0.0; pos + 1];
            new_row[pos] = 1.0;
            for &(j, a) in &terms {
                if let Status::Basic(p) = self.status[j] {
                    for (dst, src) in new_row[..pos].iter_mut().zip(&self.binv[p]) {
                        *dst -= a * src;
                    }
                }
            }
            for r in &mut self.binv {
                r.push(0.0);
            }
            self.binv.push(new_row);

            let s = self.slack(k);
            let value = self.rows[k].rhs - terms.iter().map(|&(j, a)| a * self.x[j]).sum::<f64>();
            let (l, u) = (self.lower[s], self.upper[s]);
            if value >= l - self.opts.feasibility_tol && value <= u + self.opts.feasibility_tol {
                self.status[s] = Status::Basic(pos);
                self.x[s] = value;
                self.basis.push(s);
            } else {
                let (bound, st) = if value < l {
                    (l, Status::AtLower)
                } else {
                    (u, Status::AtUpper)
                };
                self.status[s] = st;
                self.x[s] = bound;
                let sigma = if value > bound { 1.0 } else { -1.0 };
                let a = self.artificial(k);
                self.art_sign[k] = sigma;
                self.lower[a] = 0.0;
                self.upper[a] = f64::INFINITY;
                self.x[a] = (value - bound) * sigma;
                self.status[a] = Status::Basic(pos);
                self.basis.push(a);
                // Column sigma*e_pos replaces e_pos: scale inverse row.
                for v in &mut self.binv[pos] {
                    *v *= sigma;
                }
            }
        }
    }

    fn cost(&self, phase: Phase, col: usize) -> f64 {
        match phase {
            Phase::Two => self.cost2[col],
            Phase::One => {
                if col >= self.n + self.nrows() {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Column entries of any column id as (row position, value).
    fn column(&self, col: usize) -> Vec<(usize, f64)> {
        if col < self.n {
            self.cols[col].clone()
        } else if col < self.n + self.nrows() {
            let k = col - self.n;
            vec![(self.pos_of_slot[k].expect("active slack"), 1.0)]
        } else {
            let k = col - self.n - self.nrows();
            vec![(self.pos_of_slot[k].expect("active artificial"), self.art_sign[k])]
        }
    }

    fn iterate(&mut self, phase: Phase) -> Result<PhaseOutcome, LpError> {
        self.refactor()?;
        let tol_d = self.opts.optimality_tol;
        let m = self.basis.len();
        let mut y = vec![0.0; m];
        let mut alpha = vec![0.0; m];
        loop {
            if self.iterations >= self.opts.max_iterations {
                return Ok(PhaseOutcome::IterationLimit);
            }
            if self.since_refactor >= self.opts.refactor_interval {
                self.refactor()?;
            }
            // Duals.
            y.iter_mut().for_each(|v| *v = 0.0);
            for (p, &b) in self.basis.iter().enumerate() {
                let cb = self.cost(phase, b);
                if cb != 0.0 {
                    for (yk, bk) in y.iter_mut().zip(&self.binv[p]) {
                        *yk += cb * bk;
                    }
                }
            }
            // Pricing.
            let bland = self.degenerate_run >= self.opts.degenerate_switch;
            let mut entering: Option<(usize, f64)> = None;
            let mut best = 0.0;
            let ncols = self.n + 2 * self.nrows();
            for col in 0..ncols {
                let st = self.status[col];
                if matches!(st, Status::Basic(_) | Status::Inactive) {
                    continue;
                }
                if self.lower[col] == self.upper[col] {
                    continue;
                }
                let d = self.cost(phase, col)
                    - if col < self.n {
                        self.cols[col].iter().map(|&(p, a)| y[p] * a).sum::<f64>()
                    } else if col < self.n + self.nrows() {
                        y[self.pos_of_slot[col - self.n].unwrap()]
                    } else {
                        let k = col - self.n - self.nrows();
                        y[self.pos_of_slot[k].unwrap()] * self.art_sign[k]
                    };
                let eligible = match st {
                    Status::AtLower => d < -tol_d,
                    Status::AtUpper => d > tol_d,
                    Status::Free => d.abs() > tol_d,
                    _ => false,
                };
                if !eligible {
                    continue;
                }
                if bland {
                    entering = Some((col, d));
                    break;
                }
                if d.abs() > best {
                    best = d.abs();
                    entering = Some((col, d));
                }
            }
            let Some((q, d)) = entering else {
                return Ok(PhaseOutcome::Optimal);
            };
            let dir = if d < 0.0 { 1.0 } else { -1.0 };

            // alpha = Binv * a_q
            let colq = self.column(q);
            for (p, row) in self.binv.iter().enumerate() {
                alpha[p] = colq.iter().map(|&(r, a)| row[r] * a).sum();
            }

            // Ratio test.
            let ftol = self.opts.feasibility_tol;
            let ptol = self.opts.pivot_tol;
            let span = self.upper[q] - self.lower[q];
            let mut leave: Option<usize> = None;
            let mut theta;
            if bland {
                theta = f64::INFINITY;
                for p in 0..m {
                    let a = dir * alpha[p];
                    if a.abs() <= ptol {
                        continue;
                    }
                    let b = self.basis[p];
                    let lim = if a > 0.0 {
                        (self.x[b] - self.lower[b]) / a
                    } else {
                        (self.upper[b] - self.x[b]) / -a
                    };
                    if !lim.is_finite() {
                        continue;
                    }
                    let lim = lim.max(0.0);
                    let better = match leave {
                        None => true,
                        Some(lp) => {
                            lim < theta - 1e-12
                                || (lim <= theta + 1e-12 && b < self.basis[lp])
                        }
                    };
                    if better {
                        theta = if leave.is_none() { lim } else { lim.min(theta) };
                        leave = Some(p);
                    }
                }
            } else {
                // Harris two-pass: relaxed bound first, then the largest pivot.
                let mut relaxed = f64::INFINITY;
                for p in 0..m {
                    let a = dir * alpha[p];
                    if a.abs() <= ptol {
                        continue;
                    }
                    let b = self.basis[p];
                    let lim = if a > 0.0 {
                        (self.x[b] - self.lower[b] + ftol) / a
                    } else {
                        (self.upper[b] - self.x[b] + ftol) / -a
                    };
                    if lim < relaxed {
                        relaxed = lim;
                    }
                }
                theta = f64::INFINITY;
                if relaxed.is_finite() {
                    let mut best_piv = 0.0;
                    for p in 0..m {
                        let a = dir * alpha[p];
                        if a.abs() <= ptol {
                            continue;
                        }
                        let b = self.basis[p];
                        let lim = if a > 0.0 {
                            (self.x[b] - self.lower[b]) / a
                        } else {
                            (self.upper[b] - self.x[b]) / -a
                        };
                        if lim <= relaxed && a.abs() > best_piv {
                            best_piv = a.abs();
                            leave = Some(p);
                            theta = lim.max(0.0);
                        }
                    }
                }
            }

            let flip = span.is_finite() && span <= theta;
            if flip {
                theta = span;
                leave = None;
            } else if leave.is_none() {
                return Ok(PhaseOutcome::Unbounded);
            }

            self.iterations += 1;
            self.since_refactor += 1;
            if theta <= 1e-12 {
                self.degenerate_run += 1;
            } else {
                self.degenerate_run = 0;
            }

            // Primal update.
            if theta != 0.0 {
                self.x[q] += dir * theta;
                for p in 0..m {
                    if alpha[p] != 0.0 {
                        let b = self.basis[p];
                        self.x[b] -= theta * dir * alpha[p];
                    }
                }
            }
            match leave {
                None => {
                    let st = self.status[q];
                    let to_upper = matches!(st, Status::AtLower);
                    self.status[q] = if to_upper { Status::AtUpper } else { Status::AtLower };
                    self.x[q] = if to_upper { self.upper[q] } else { self.lower[q] };
                }
                Some(r) => {
                    let b = self.basis[r];
                    let a = dir * alpha[r];
                    let (val, st) = if a > 0.0 {
                        (self.lower[b], Status::AtLower)
                    } else {
                        (self.upper[b], Status::AtUpper)
                    };
                    self.x[b] = val;
                    self.status[b] = st;
                    if b >= self.n + self.nrows() {
                        // Artificial left the basis for good.
                        self.upper[b] = 0.0;
                        self.x[b] = 0.0;
                        self.status[b] = Status::AtLower;
                    }
                    self.basis[r] = q;
                    self.status[q] = Status::Basic(r);
                    self.pivot(r, &alpha);
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, alpha: &[f64]) {
        let piv = alpha[r];
        let pivot_row: Vec<f64> = self.binv[r].iter().map(|v| v / piv).collect();
        for (p, row) in self.binv.iter_mut().enumerate() {
            if p == r {
                continue;
            }
            let f = alpha[p];
            if f != 0.0 {
                for (v, pr) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pr;
                }
            }
        }
        self.binv[r] = pivot_row;
    }

    /// Rebuilds the inverse from the basis columns and recomputes basic values.
    fn refactor(&mut self) -> Result<(), LpError> {
        self.since_refactor = 0;
        let m = self.basis.len();
        let nrows = self.nrows();
        // Unit columns cover their own row; structural columns cover the rest.
        let mut covered: Vec<Option<(usize, f64)>> = vec![None; m];
        let mut structural: Vec<usize> = Vec::new();
        for (p, &b) in self.basis.iter().enumerate() {
            if b < self.n {
                structural.push(p);
            } else if b < self.n + nrows {
                covered[self.pos_of_slot[b - self.n].unwrap()] = Some((p, 1.0));
            } else {
                let k = b - self.n - nrows;
                covered[self.pos_of_slot[k].unwrap()] = Some((p, self.art_sign[k]));
            }
        }
        let free_rows: Vec<usize> = (0..m).filter(|&r| covered[r].is_none()).collect();
        let k = structural.len();
        if free_rows.len() != k {
            return Err(LpError::SingularBasis);
        }
        let mut local = vec![usize::MAX; m];
        for (i, &r) in free_rows.iter().enumerate() {
            local[r] = i;
        }
        // Dense k x k block A_FS and its inverse via Gauss-Jordan.
        let mut a = vec![vec![0.0; k]; k];
        for (c, &p) in structural.iter().enumerate() {
            for &(r, v) in &self.cols[self.basis[p]] {
                if local[r] != usize::MAX {
                    a[local[r]][c] = v;
                }
            }
        }
        let g = invert(a).ok_or(LpError::SingularBasis)?;

        let mut binv = vec![vec![0.0; m]; m];
        for (i, &p) in structural.iter().enumerate() {
            for (f, &r) in free_rows.iter().enumerate() {
                binv[p][r] = g[i][f];
            }
        }
        // Covered rows: sigma * (e_r - A_{r,S} G) on the free columns.
        let mut w: Vec<Vec<f64>> = vec![Vec::new(); m];
        for (i, &p) in structural.iter().enumerate() {
            for &(r, v) in &self.cols[self.basis[p]] {
                if covered[r].is_some() {
                    let acc = &mut w[r];
                    if acc.is_empty() {
                        acc.resize(k, 0.0);
                    }
                    for (dst, gv) in acc.iter_mut().zip(&g[i]) {
                        *dst += v * gv;
                    }
                }
            }
        }
        for r in 0..m {
            if let Some((p, sigma)) = covered[r] {
                binv[p][r] = sigma;
                if !w[r].is_empty() {
                    for (f, &fr) in free_rows.iter().enumerate() {
                        binv[p][fr] = -sigma * w[r][f];
                    }
                }
            }
        }
        self.binv = binv;
        self.recompute_basics();
        Ok(())
    }

    fn recompute_basics(&mut self) {
        let m = self.basis.len();
        let nrows = self.nrows();
        let mut rhs: Vec<f64> = self.slot_of_pos.iter().map(|&k| self.rows[k].rhs).collect();
        for j in 0..self.n {
            if !matches!(self.status[j], Status::Basic(_)) && self.x[j] != 0.0 {
                for &(r, a) in &self.cols[j] {
                    rhs[r] -= a * self.x[j];
                }
            }
        }
        for (pos, &k) in self.slot_of_pos.iter().enumerate() {
            let s = self.n + k;
            if !matches!(self.status[s], Status::Basic(_)) {
                rhs[pos] -= self.x[s];
            }
            let a = self.n + nrows + k;
            if !matches!(self.status[a], Status::Basic(_) | Status::Inactive) {
                rhs[pos] -= self.art_sign[k] * self.x[a];
            }
        }
        for p in 0..m {
            let v: f64 = self.binv[p].iter().zip(&rhs).map(|(b, r)| b * r).sum();
            self.x[self.basis[p]] = v;
        }
    }

    /// Snaps basic values that drifted just outside their bounds.
    fn clamp_basics(&mut self) {
        for &b in &self.basis {
            if b < self.n {
                self.x[b] = self.x[b].clamp(self.lower[b], self.upper[b]);
            }
        }
    }
}

/// Gauss-Jordan inverse with partial pivoting.
fn invert(mut a: Vec<Vec<f64>>) -> Option<Vec<Vec<f64>>> {
    let k = a.len();
    let mut inv: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let mut r = vec![0.0; k];
            r[i] = 1.0;
            r
        })
        .collect();
    for c in 0..k {
        let (piv_row, piv_abs) = (c..k)
            .map(|r| (r, a[r][c].abs()))
            .fold((c, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
        if piv_abs < 1e-11 {
            return None;
        }
        a.swap(c, piv_row);
        inv.swap(c, piv_row);
        let p = a[c][c];
        for v in &mut a[c] {
            *v /= p;
        }
        for v in &mut inv[c] {
            *v /= p;
        }
        let (arow, irow) = (a[c].clone(), inv[c].clone());
        for r in 0..k {
            if r == c {
                continue;
            }
            let f = a[r][c];
            if f != 0.0 {
                for (v, s) in a[r].iter_mut().zip(&arow) {
                    *v -= f * s;
                }
                for (v, s) in inv[r].iter_mut().zip(&irow) {
                    *v -= f * s;
                }
            }
        }
    }
    Some(inv)
}
