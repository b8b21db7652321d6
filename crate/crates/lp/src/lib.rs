//! Linear programming for the flexibility-envelope engine.
//!
//! Models are assembled with [`LpModel`] and solved through the [`LpSolver`]
//! trait. [`SimplexSolver`] is the bundled bounded-variable revised simplex;
//! [`ExternalSolver`] hands an LP-text dump to an outside program so results
//! can be cross-checked without touching the model builders.
//!
//! ```
//! use flexenv_lp::{Direction, LpModel, LpSolver, Sense, SimplexSolver};
//!
//! let mut model = LpModel::new(Direction::Maximize);
//! let x = model.add_variable(0.0, f64::INFINITY).unwrap();
//! let y = model.add_variable(0.0, 3.0).unwrap();
//! model.add_constraint(x + y, Sense::Le, 4.0).unwrap();
//! model.set_objective(Direction::Maximize, x + y * 2.0).unwrap();
//!
//! let solution = SimplexSolver::default().solve(&model).unwrap();
//! assert!((solution.objective_value - 7.0).abs() < 1e-9);
//! ```

mod error;
mod external;
mod lp_text;
mod model;
mod simplex;

pub use error::LpError;
pub use external::ExternalSolver;
pub use lp_text::write_lp_text;
pub use model::{
    Constraint, ConstraintId, Direction, LinExpr, LpModel, LpSolution, LpStatus, Sense, VarRef,
};
pub use simplex::{SimplexOptions, SimplexSolver};

/// Solver boundary: anything that maps a model to a primal solution.
pub trait LpSolver: Send + Sync {
    fn solve(&self, model: &LpModel) -> Result<LpSolution, LpError>;

    fn name(&self) -> String;
}
