//! Voltage sensitivities against a dense matrix inverse and a direct
//! branch-flow sweep on random radial trees.

use flexenv_core::netmodel::{
    sensitivity_matrices, uncertainty_margins, voltage_profile, Bus, Line, Network, Profiles, UncertaintySpec,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

#[derive(Clone, Debug)]
struct Tree {
    /// parent[k] for bus k + 2, 1-based ids.
    parent: Vec<usize>,
    r: Vec<f64>,
    x: Vec<f64>,
    flip: Vec<bool>,
}

fn tree(max_buses: usize) -> impl Strategy<Value = Tree> {
    (2..=max_buses).prop_flat_map(|n| {
        let parents: Vec<BoxedStrategy<usize>> = (2..=n).map(|b| (1..b).boxed()).collect();
        (
            parents,
            prop::collection::vec(0.001f64..0.1, n - 1),
            prop::collection::vec(0.0f64..0.1, n - 1),
            prop::collection::vec(any::<bool>(), n - 1),
        )
            .prop_map(|(parent, r, x, flip)| Tree { parent, r, x, flip })
    })
}

fn network(t: &Tree) -> Network {
    let n = t.parent.len() + 1;
    // list lines in reverse with random orientation so the implementation
    // cannot rely on input order
    let lines = (0..n - 1)
        .rev()
        .map(|k| {
            let (a, b) = (t.parent[k], k + 2);
            let (from_bus, to_bus) = if t.flip[k] { (b, a) } else { (a, b) };
            Line {
                from_bus,
                to_bus,
                r: t.r[k],
                x: t.x[k],
            }
        })
        .collect();
    Network {
        buses: (1..=n).map(|id| Bus { id, name: None }).collect(),
        lines,
        u_min: 0.9,
        u_max: 1.1,
        s_base_kva: 1000.0,
        v_base_kv: 1.0,
    }
}

/// A⁻¹ diag(z) A⁻ᵀ with A the reduced incidence built from parent pointers.
fn dense_oracle(t: &Tree, z: &[f64]) -> DMatrix<f64> {
    let m = t.parent.len();
    let mut a = DMatrix::<f64>::zeros(m, m);
    for k in 0..m {
        a[(k, k)] = 1.0;
        if t.parent[k] >= 2 {
            a[(k, t.parent[k] - 2)] = -1.0;
        }
    }
    let inv = a.try_inverse().expect("tree incidence is invertible");
    &inv * DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(z)) * inv.transpose()
}

/// u at each non-slack bus by summing downstream injections along each line.
fn sweep(t: &Tree, p: &[f64], q: &[f64]) -> Vec<f64> {
    let m = t.parent.len();
    let mut fp = p.to_vec();
    let mut fq = q.to_vec();
    for k in (0..m).rev() {
        let par = t.parent[k];
        if par >= 2 {
            fp[par - 2] += fp[k];
            fq[par - 2] += fq[k];
        }
    }
    let mut u = vec![0.0; m];
    for k in 0..m {
        let up = if t.parent[k] >= 2 { u[t.parent[k] - 2] } else { 1.0 };
        u[k] = up + t.r[k] * fp[k] + t.x[k] * fq[k];
    }
    u
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_dense_inverse(t in tree(10)) {
        let s = sensitivity_matrices(&network(&t)).unwrap();
        let hp = dense_oracle(&t, &t.r);
        let hq = dense_oracle(&t, &t.x);
        prop_assert!((&s.h_p - hp).abs().max() < 1e-12);
        prop_assert!((&s.h_q - hq).abs().max() < 1e-12);
        prop_assert!((&s.h_p - s.h_p.transpose()).abs().max() == 0.0);
        prop_assert!(s.h_p.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn profile_matches_branch_flow_sweep(
        t in tree(33),
        seed in prop::collection::vec(-1.0f64..1.0, 64),
    ) {
        let m = t.parent.len();
        let p: Vec<f64> = seed[..m].to_vec();
        let q: Vec<f64> = seed[32..32 + m].to_vec();
        let s = sensitivity_matrices(&network(&t)).unwrap();
        let u = voltage_profile(&s, &p, &q).unwrap();
        for (a, b) in u.iter().zip(sweep(&t, &p, &q)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        let u2 = voltage_profile(&s.clone().doubled(), &p, &q).unwrap();
        for (a, b) in u2.iter().zip(&u) {
            prop_assert!(((a - 1.0) - 2.0 * (b - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn margins_grow_with_alpha(t in tree(12), a in 0.0f64..0.2, extra in 0.0f64..0.2) {
        let net = network(&t);
        let n = net.num_buses();
        let mut prof = Profiles::zeros(3, 1.0, n);
        for (k, row) in prof.load_p.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate().skip(1) {
                *v = 10.0 + (b * 7 + k * 3) as f64 % 13.0;
            }
        }
        let s = sensitivity_matrices(&net).unwrap();
        let lo = uncertainty_margins(&s, &prof, &UncertaintySpec::new(a, a)).unwrap();
        let hi = uncertainty_margins(&s, &prof, &UncertaintySpec::new(a + extra, a + extra)).unwrap();
        for (l, h) in lo.delta_u.iter().flatten().zip(hi.delta_u.iter().flatten()) {
            prop_assert!(*l >= 0.0 && h + 1e-15 >= *l);
        }
    }
}
