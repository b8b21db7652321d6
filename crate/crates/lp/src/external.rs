//! Out-of-process solver adapter.
//!
//! The program is invoked as `<program> <model.lp>` on an LP-text dump and must
//! print `status <optimal|infeasible|unbounded|limit>` followed by one
//! `x<index> <value>` line per variable.

use std::path::PathBuf;
use std::process::Command;

use crate::error::LpError;
use crate::lp_text::write_lp_text;
use crate::model::{LpModel, LpSolution, LpStatus};
use crate::LpSolver;

#[derive(Clone, Debug)]
pub struct ExternalSolver {
    pub program: PathBuf,
}

impl ExternalSolver {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        Self {
            program: program.into(),
        }
    }
}

impl LpSolver for ExternalSolver {
    fn solve(&self, model: &LpModel) -> Result<LpSolution, LpError> {
        let dir = tempfile::tempdir()?;
        let path = dir.path().join("model.lp");
        std::fs::write(&path, write_lp_text(model))?;
        let out = Command::new(&self.program).arg(&path).output()?;
        if !out.status.success() {
            return Err(LpError::External(format!(
                "{} exited with {}: {}",
                self.program.display(),
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        parse_output(&String::from_utf8_lossy(&out.stdout), model)
    }

    fn name(&self) -> String {
        format!("external:{}", self.program.display())
    }
}

fn parse_output(text: &str, model: &LpModel) -> Result<LpSolution, LpError> {
    let n = model.num_variables();
    let mut status = None;
    let mut primal = vec![0.0; n];
    for line in text.lines() {
        let mut parts = line.split_whitespace();
        let (Some(key), Some(value)) = (parts.next(), parts.next()) else {
            continue;
        };
        if key == "status" {
            status = Some(match value {
                "optimal" => LpStatus::Optimal,
                "infeasible" => LpStatus::Infeasible,
                "unbounded" => LpStatus::Unbounded,
                "limit" => LpStatus::IterationLimit,
                other => return Err(LpError::External(format!("unknown status {other}"))),
            });
        } else if let Some(idx) = key.strip_prefix('x') {
            let j: usize = idx
                .parse()
                .map_err(|_| LpError::External(format!("bad variable name {key}")))?;
            let v: f64 = value
                .parse()
                .map_err(|_| LpError::External(format!("bad value for {key}: {value}")))?;
            if j < n {
                primal[j] = v;
            }
        }
    }
    let status = status.ok_or_else(|| LpError::External("no status line".into()))?;
    let objective_value = if status == LpStatus::Optimal {
        model.objective_at(&primal)
    } else {
        f64::NAN
    };
    Ok(LpSolution {
        status,
        objective_value,
        primal,
        iterations: 0,
    })
}
