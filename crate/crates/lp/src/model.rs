//! Linear program representation and incremental builder.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::LpError;

static NEXT_MODEL_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a variable created on an [`LpModel`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarRef {
    model: u64,
    index: usize,
}

impl VarRef {
    /// Position of the variable in creation order.
    pub fn index(self) -> usize {
        self.index
    }
}

/// Constraint sense.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Maximize,
    Minimize,
}

/// Affine expression: a sum of `coefficient * variable` terms plus a constant.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinExpr {
    terms: Vec<(VarRef, f64)>,
    constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: value,
        }
    }

    pub fn term(var: VarRef, coeff: f64) -> Self {
        Self {
            terms: vec![(var, coeff)],
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, var: VarRef, coeff: f64) -> &mut Self {
        self.terms.push((var, coeff));
        self
    }

    pub fn add_constant(&mut self, value: f64) -> &mut Self {
        self.constant += value;
        self
    }

    pub fn terms(&self) -> &[(VarRef, f64)] {
        &self.terms
    }

    pub fn constant_part(&self) -> f64 {
        self.constant
    }

    /// Adds `scale * other` to this expression.
    pub fn add_scaled(&mut self, other: &LinExpr, scale: f64) -> &mut Self {
        self.terms
            .extend(other.terms.iter().map(|&(v, c)| (v, c * scale)));
        self.constant += other.constant * scale;
        self
    }

    /// Merges duplicate variables and drops exact zeros. Terms end up sorted by
    /// variable index.
    pub fn normalize(&mut self) {
        self.terms.sort_by_key(|(v, _)| v.index);
        let mut merged: Vec<(VarRef, f64)> = Vec::with_capacity(self.terms.len());
        for &(v, c) in &self.terms {
            match merged.last_mut() {
                Some((last, acc)) if *last == v => *acc += c,
                _ => merged.push((v, c)),
            }
        }
        merged.retain(|&(_, c)| c != 0.0);
        self.terms = merged;
    }

    /// Evaluates the expression at a point given as a slice indexed by variable.
    pub fn eval(&self, values: &[f64]) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|&(v, c)| c * values[v.index])
                .sum::<f64>()
    }
}

impl From<VarRef> for LinExpr {
    fn from(v: VarRef) -> Self {
        LinExpr::term(v, 1.0)
    }
}

impl From<f64> for LinExpr {
    fn from(c: f64) -> Self {
        LinExpr::constant(c)
    }
}

impl<T: Into<LinExpr>> AddAssign<T> for LinExpr {
    fn add_assign(&mut self, rhs: T) {
        let rhs = rhs.into();
        self.add_scaled(&rhs, 1.0);
    }
}

impl<T: Into<LinExpr>> SubAssign<T> for LinExpr {
    fn sub_assign(&mut self, rhs: T) {
        let rhs = rhs.into();
        self.add_scaled(&rhs, -1.0);
    }
}

impl<T: Into<LinExpr>> Add<T> for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: T) -> LinExpr {
        self += rhs;
        self
    }
}

impl<T: Into<LinExpr>> Sub<T> for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: T) -> LinExpr {
        self -= rhs;
        self
    }
}

impl Mul<f64> for LinExpr {
    type Output = LinExpr;
    fn mul(mut self, rhs: f64) -> LinExpr {
        for t in &mut self.terms {
            t.1 *= rhs;
        }
        self.constant *= rhs;
        self
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self * -1.0
    }
}

impl<T: Into<LinExpr>> Add<T> for VarRef {
    type Output = LinExpr;
    fn add(self, rhs: T) -> LinExpr {
        LinExpr::from(self) + rhs
    }
}

impl<T: Into<LinExpr>> Sub<T> for VarRef {
    type Output = LinExpr;
    fn sub(self, rhs: T) -> LinExpr {
        LinExpr::from(self) - rhs
    }
}

impl Mul<f64> for VarRef {
    type Output = LinExpr;
    fn mul(self, rhs: f64) -> LinExpr {
        LinExpr::term(self, rhs)
    }
}

impl Mul<VarRef> for f64 {
    type Output = LinExpr;
    fn mul(self, rhs: VarRef) -> LinExpr {
        LinExpr::term(rhs, self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConstraintId(pub(crate) usize);

impl ConstraintId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
pub(crate) struct VarData {
    pub lower: f64,
    pub upper: f64,
    pub name: Option<String>,
}

/// A stored row `terms (sense) rhs`. The expression constant has already been
/// moved to the right-hand side.
#[derive(Clone, Debug)]
pub struct Constraint {
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    /// Lazy rows are only brought into the working basis when violated.
    pub lazy: bool,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates this row (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.sense {
            Sense::Le => (act - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - act).max(0.0),
            Sense::Eq => (act - self.rhs).abs(),
        }
    }
}

/// A linear program `max/min c'x` subject to linear rows and variable bounds.
#[derive(Clone, Debug)]
pub struct LpModel {
    id: u64,
    pub(crate) vars: Vec<VarData>,
    pub(crate) constraints: Vec<Constraint>,
    pub(crate) objective: Vec<(usize, f64)>,
    pub(crate) objective_constant: f64,
    pub(crate) direction: Direction,
}

impl Default for LpModel {
    fn default() -> Self {
        Self::new(Direction::Maximize)
    }
}

impl LpModel {
    pub fn new(direction: Direction) -> Self {
        Self {
            id: NEXT_MODEL_ID.fetch_add(1, Ordering::Relaxed),
            vars: Vec::new(),
            constraints: Vec::new(),
            objective: Vec::new(),
            objective_constant: 0.0,
            direction,
        }
    }

    pub fn add_variable(&mut self, lower: f64, upper: f64) -> Result<VarRef, LpError> {
        if lower.is_nan() || upper.is_nan() || lower > upper || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
            return Err(LpError::InvertedBounds { lower, upper });
        }
        self.vars.push(VarData {
            lower,
            upper,
            name: None,
        });
        Ok(VarRef {
            model: self.id,
            index: self.vars.len() - 1,
        })
    }

    pub fn add_named_variable(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
    ) -> Result<VarRef, LpError> {
        let v = self.add_variable(lower, upper)?;
        self.vars[v.index].name = Some(name.into());
        Ok(v)
    }

    pub fn add_constraint(
        &mut self,
        expr: impl Into<LinExpr>,
        sense: Sense,
        rhs: f64,
    ) -> Result<ConstraintId, LpError> {
        self.push_row(expr.into(), sense, rhs, false)
    }

    /// Adds a row that the bundled solver enforces by row generation: it only
    /// enters the working problem once an intermediate optimum violates it. The
    /// optimum is the same as for [`LpModel::add_constraint`].
    pub fn add_lazy_constraint(
        &mut self,
        expr: impl Into<LinExpr>,
        sense: Sense,
        rhs: f64,
    ) -> Result<ConstraintId, LpError> {
        self.push_row(expr.into(), sense, rhs, true)
    }

    fn push_row(
        &mut self,
        mut expr: LinExpr,
        sense: Sense,
        rhs: f64,
        lazy: bool,
    ) -> Result<ConstraintId, LpError> {
        self.check_owned(&expr)?;
        if !rhs.is_finite() || !expr.constant.is_finite() {
            return Err(LpError::NonFinite("constraint right-hand side"));
        }
        expr.normalize();
        if expr.terms.iter().any(|(_, c)| !c.is_finite()) {
            return Err(LpError::NonFinite("constraint coefficient"));
        }
        self.constraints.push(Constraint {
            terms: expr.terms.iter().map(|&(v, c)| (v.index, c)).collect(),
            sense,
            rhs: rhs - expr.constant,
            lazy,
        });
        Ok(ConstraintId(self.constraints.len() - 1))
    }

    pub fn set_objective(
        &mut self,
        direction: Direction,
        expr: impl Into<LinExpr>,
    ) -> Result<(), LpError> {
        let mut expr = expr.into();
        self.check_owned(&expr)?;
        expr.normalize();
        self.direction = direction;
        self.objective = expr.terms.iter().map(|&(v, c)| (v.index, c)).collect();
        self.objective_constant = expr.constant;
        Ok(())
    }

    fn check_owned(&self, expr: &LinExpr) -> Result<(), LpError> {
        for (v, _) in &expr.terms {
            if v.model != self.id || v.index >= self.vars.len() {
                return Err(LpError::ForeignVariable { index: v.index });
            }
        }
        Ok(())
    }

    pub fn num_variables(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn constraint(&self, id: ConstraintId) -> &Constraint {
        &self.constraints[id.0]
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn bounds(&self, var: VarRef) -> (f64, f64) {
        let d = &self.vars[var.index];
        (d.lower, d.upper)
    }

    pub(crate) fn var_name(&self, j: usize) -> String {
        match &self.vars[j].name {
            Some(n) => n.clone(),
            None => format!("x{j}"),
        }
    }

    /// Objective value (including the constant) at a point.
    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective_constant + self.objective.iter().map(|&(j, c)| c * x[j]).sum::<f64>()
    }

    /// Largest bound or row violation of a point, in model units.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let bounds = self
            .vars
            .iter()
            .zip(x)
            .map(|(d, &v)| (d.lower - v).max(v - d.upper).max(0.0));
        let rows = self.constraints.iter().map(|c| c.violation(x));
        bounds.chain(rows).fold(0.0, f64::max)
    }
}

/// Termination status of a solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective_value: f64,
    pub primal: Vec<f64>,
    /// Simplex pivots performed (zero for external solvers that do not report it).
    pub iterations: usize,
}

impl LpSolution {
    pub fn value(&self, var: VarRef) -> f64 {
        self.primal[var.index]
    }

    pub fn eval(&self, expr: &LinExpr) -> f64 {
        expr.eval(&self.primal)
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_merges_duplicates() {
        let mut m = LpModel::new(Direction::Maximize);
        let x = m.add_variable(0.0, 1.0).unwrap();
        let y = m.add_variable(0.0, 1.0).unwrap();
        let mut e = x + x + y * 2.0 - y * 2.0;
        e.normalize();
        assert_eq!(e.terms(), &[(x, 2.0)]);
    }

    #[test]
    fn constant_moves_to_rhs() {
        let mut m = LpModel::new(Direction::Maximize);
        let x = m.add_variable(0.0, 1.0).unwrap();
        let id = m.add_constraint(x + 3.0, Sense::Le, 5.0).unwrap();
        assert_eq!(m.constraint(id).rhs, 2.0);
    }

    #[test]
    fn foreign_variable_rejected() {
        let mut a = LpModel::new(Direction::Maximize);
        let mut b = LpModel::new(Direction::Maximize);
        let xa = a.add_variable(0.0, 1.0).unwrap();
        let _ = b.add_variable(0.0, 1.0).unwrap();
        assert!(matches!(
            b.add_constraint(xa, Sense::Le, 1.0),
            Err(LpError::ForeignVariable { .. })
        ));
    }

    #[test]
    fn inverted_bounds_rejected() {
        let mut m = LpModel::new(Direction::Maximize);
        assert!(matches!(
            m.add_variable(2.0, 1.0),
            Err(LpError::InvertedBounds { .. })
        ));
    }
}
