use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Network, Profiles};

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("expected a vector of length {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("network is not a tree rooted at bus 1: {0}")]
    NotATree(String),
    #[error(
        "voltage band inverted by robust margins at bus {bus}, step {step}: \
         tightened bounds [{lower:.6}, {upper:.6}]"
    )]
    InvertedBand {
        bus: usize,
        step: usize,
        lower: f64,
        upper: f64,
    },
}

/// Voltage sensitivities over the non-slack buses. Row/column `i` is bus `i + 2`.
#[derive(Clone, Debug)]
pub struct SensitivityMatrices {
    /// Reduced node-branch incidence, rows = non-slack buses, columns = lines
    /// (in case order), +1 at the upstream end and -1 at the downstream end.
    pub incidence: DMatrix<f64>,
    pub h_p: DMatrix<f64>,
    pub h_q: DMatrix<f64>,
    pub s_base_kva: f64,
}

impl SensitivityMatrices {
    pub fn dim(&self) -> usize {
        self.h_p.nrows()
    }

    /// Conventional squared-voltage scaling (2r, 2x).
    pub fn doubled(mut self) -> Self {
        self.h_p *= 2.0;
        self.h_q *= 2.0;
        self
    }
}

struct Tree {
    parent: Vec<usize>,
    depth: Vec<usize>,
    r_cum: Vec<f64>,
    x_cum: Vec<f64>,
    /// index of the line feeding each bus
    feeder: Vec<usize>,
}

fn orient(net: &Network) -> Result<Tree, NetworkError> {
    let n = net.num_buses();
    if net.lines.len() + 1 != n {
        return Err(NetworkError::NotATree(format!(
            "{} buses, {} lines",
            n,
            net.lines.len()
        )));
    }
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n + 1];
    for (k, l) in net.lines.iter().enumerate() {
        adj[l.from_bus].push((l.to_bus, k));
        adj[l.to_bus].push((l.from_bus, k));
    }
    let mut t = Tree {
        parent: vec![0; n + 1],
        depth: vec![0; n + 1],
        r_cum: vec![0.0; n + 1],
        x_cum: vec![0.0; n + 1],
        feeder: vec![usize::MAX; n + 1],
    };
    let mut seen = vec![false; n + 1];
    seen[1] = true;
    let mut stack = vec![1];
    while let Some(u) = stack.pop() {
        for &(v, k) in &adj[u] {
            if seen[v] {
                continue;
            }
            seen[v] = true;
            t.parent[v] = u;
            t.depth[v] = t.depth[u] + 1;
            t.r_cum[v] = t.r_cum[u] + net.lines[k].r;
            t.x_cum[v] = t.x_cum[u] + net.lines[k].x;
            t.feeder[v] = k;
            stack.push(v);
        }
    }
    if let Some(b) = (1..=n).find(|&b| !seen[b]) {
        return Err(NetworkError::NotATree(format!("bus {b} unreachable")));
    }
    Ok(t)
}

impl Tree {
    fn lca(&self, mut a: usize, mut b: usize) -> usize {
        while self.depth[a] > self.depth[b] {
            a = self.parent[a];
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b];
        }
        while a != b {
            a = self.parent[a];
            b = self.parent[b];
        }
        a
    }
}

/// H_P and H_Q by common-path impedance: entry (i, j) is the cumulative
/// resistance (reactance) from the root to the lowest common ancestor of i, j.
pub fn sensitivity_matrices(network: &Network) -> Result<SensitivityMatrices, NetworkError> {
    let tree = orient(network)?;
    let n = network.num_buses();
    let m = n - 1;
    let mut h_p = DMatrix::zeros(m, m);
    let mut h_q = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let a = tree.lca(i + 2, j + 2);
            h_p[(i, j)] = tree.r_cum[a];
            h_p[(j, i)] = tree.r_cum[a];
            h_q[(i, j)] = tree.x_cum[a];
            h_q[(j, i)] = tree.x_cum[a];
        }
    }
    let mut incidence = DMatrix::zeros(m, network.lines.len());
    for b in 2..=n {
        let k = tree.feeder[b];
        incidence[(b - 2, k)] = -1.0;
        let up = tree.parent[b];
        if up != 1 {
            incidence[(up - 2, k)] = 1.0;
        }
    }
    Ok(SensitivityMatrices {
        incidence,
        h_p,
        h_q,
        s_base_kva: network.s_base_kva,
    })
}

/// Squared voltages at the non-slack buses for per-unit injections.
pub fn voltage_profile(
    sens: &SensitivityMatrices,
    p_inj: &[f64],
    q_inj: &[f64],
) -> Result<Vec<f64>, NetworkError> {
    let m = sens.dim();
    for v in [p_inj, q_inj] {
        if v.len() != m {
            return Err(NetworkError::Dimension {
                expected: m,
                got: v.len(),
            });
        }
    }
    let u = &sens.h_p * DVector::from_column_slice(p_inj) + &sens.h_q * DVector::from_column_slice(q_inj);
    Ok(u.iter().map(|x| 1.0 + x).collect())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySpec {
    pub alpha: f64,
    pub beta: f64,
    /// Also apply `alpha` to reactive load through |H_Q|.
    #[serde(default)]
    pub reactive: bool,
}

impl UncertaintySpec {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self {
            alpha,
            beta,
            reactive: false,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.alpha == 0.0 && self.beta == 0.0
    }
}

/// Squared-voltage margins, indexed `[step][non-slack bus]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustMargins {
    pub delta_u: Vec<Vec<f64>>,
}

impl RobustMargins {
    pub fn zeros(steps: usize, dim: usize) -> Self {
        Self {
            delta_u: vec![vec![0.0; dim]; steps],
        }
    }

    /// Fails on the first (step, bus) whose tightened band is empty.
    pub fn check_band(&self, network: &Network) -> Result<(), NetworkError> {
        for (t, row) in self.delta_u.iter().enumerate() {
            for (i, &d) in row.iter().enumerate() {
                let (lower, upper) = (network.u_min + d, network.u_max - d);
                if lower > upper {
                    return Err(NetworkError::InvertedBand {
                        bus: i + 2,
                        step: t + 1,
                        lower,
                        upper,
                    });
                }
            }
        }
        Ok(())
    }
}

pub fn uncertainty_margins(
    sens: &SensitivityMatrices,
    profiles: &Profiles,
    spec: &UncertaintySpec,
) -> Result<RobustMargins, NetworkError> {
    let m = sens.dim();
    let abs_p = sens.h_p.abs();
    let abs_q = sens.h_q.abs();
    let mut delta_u = Vec::with_capacity(profiles.steps);
    for t in 0..profiles.steps {
        let row_len = profiles.load_p[t].len();
        if row_len != m + 1 {
            return Err(NetworkError::Dimension {
                expected: m + 1,
                got: row_len,
            });
        }
        let xi = DVector::from_iterator(
            m,
            (1..=m).map(|b| {
                (spec.alpha * profiles.load_p[t][b].abs() + spec.beta * profiles.pv_p[t][b].abs())
                    / sens.s_base_kva
            }),
        );
        let mut d = &abs_p * xi;
        if spec.reactive {
            let xq = DVector::from_iterator(
                m,
                (1..=m).map(|b| spec.alpha * profiles.load_q[t][b].abs() / sens.s_base_kva),
            );
            d += &abs_q * xq;
        }
        delta_u.push(d.iter().copied().collect());
    }
    Ok(RobustMargins { delta_u })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{Bus, Line};

    fn net(lines: &[(usize, usize, f64, f64)]) -> Network {
        Network {
            buses: (1..=lines.len() + 1).map(|id| Bus { id, name: None }).collect(),
            lines: lines
                .iter()
                .map(|&(f, t, r, x)| Line {
                    from_bus: f,
                    to_bus: t,
                    r,
                    x,
                })
                .collect(),
            u_min: 0.9025,
            u_max: 1.1025,
            s_base_kva: 1000.0,
            v_base_kv: 12.66,
        }
    }

    #[test]
    fn single_line() {
        let s = sensitivity_matrices(&net(&[(1, 2, 0.1, 0.0)])).unwrap();
        assert_eq!(s.h_p[(0, 0)], 0.1);
        assert_eq!(s.incidence[(0, 0)], -1.0);
        assert_eq!(voltage_profile(&s, &[0.5], &[0.0]).unwrap(), vec![1.05]);
        assert_eq!(voltage_profile(&s, &[0.0], &[0.0]).unwrap(), vec![1.0]);
        assert!(voltage_profile(&s, &[0.0, 1.0], &[0.0]).is_err());
    }

    #[test]
    fn path_and_star() {
        let path = sensitivity_matrices(&net(&[(1, 2, 0.1, 0.0), (2, 3, 0.2, 0.0)])).unwrap();
        assert_eq!(path.h_p[(0, 0)], 0.1);
        assert_eq!(path.h_p[(0, 1)], 0.1);
        assert_eq!(path.h_p[(1, 0)], 0.1);
        assert!((path.h_p[(1, 1)] - 0.3).abs() < 1e-15);
        let star = sensitivity_matrices(&net(&[(1, 2, 0.1, 0.0), (3, 1, 0.2, 0.0)])).unwrap();
        assert_eq!(star.h_p, DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, 0.2]));
    }

    #[test]
    fn doubled_scales_both() {
        let s = sensitivity_matrices(&net(&[(1, 2, 0.1, 0.3)])).unwrap().doubled();
        assert_eq!(s.h_p[(0, 0)], 0.2);
        assert_eq!(s.h_q[(0, 0)], 0.6);
    }

    #[test]
    fn margins_direct_formula() {
        let n = net(&[(1, 2, 0.1, 0.0)]);
        let s = sensitivity_matrices(&n).unwrap();
        let mut p = Profiles::zeros(2, 1.0, 2);
        p.load_p[0][1] = 1000.0;
        p.pv_p[0][1] = 500.0;
        let m = uncertainty_margins(&s, &p, &UncertaintySpec::new(0.1, 0.1)).unwrap();
        assert!((m.delta_u[0][0] - 0.015).abs() < 1e-15);
        assert_eq!(m.delta_u[1][0], 0.0);
        let z = uncertainty_margins(&s, &p, &UncertaintySpec::new(0.0, 0.0)).unwrap();
        assert!(z.delta_u.iter().flatten().all(|&d| d == 0.0));
        let a2 = uncertainty_margins(&s, &p, &UncertaintySpec::new(0.2, 0.0)).unwrap();
        let a1 = uncertainty_margins(&s, &p, &UncertaintySpec::new(0.1, 0.0)).unwrap();
        assert!((a2.delta_u[0][0] - 2.0 * a1.delta_u[0][0]).abs() < 1e-15);
    }

    #[test]
    fn inverted_band_reports_first_location() {
        let n = net(&[(1, 2, 0.1, 0.0), (2, 3, 0.1, 0.0)]);
        let m = RobustMargins {
            delta_u: vec![vec![0.0, 0.0], vec![0.0, 0.2]],
        };
        assert_eq!(
            m.check_band(&n).unwrap_err(),
            NetworkError::InvertedBand {
                bus: 3,
                step: 2,
                lower: 0.9025 + 0.2,
                upper: 1.1025 - 0.2
            }
        );
    }
}
