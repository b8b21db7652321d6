//! Bundled cases: the 33-bus feeder with synthetic profiles and prices, and a
//! two-bus single-generator toy.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::market::MarketPrices;
use crate::netmodel::{parse_case, Bus, Generator, Line, Network, Profiles, Scenario, Storage};

pub const CASE33_JSON: &str = include_str!("../data/case33.json");
pub const CASE33_PROFILES_CSV: &str = include_str!("../data/case33_profiles.csv");
pub const PRICES_CSV: &str = include_str!("../data/prices.csv");
pub const TOY_JSON: &str = include_str!("../data/toy.json");

pub fn case33() -> Scenario {
    crate::netmodel::parse_case_with_profiles(CASE33_JSON, CASE33_PROFILES_CSV)
        .expect("bundled case33 is valid")
}

pub fn case33_prices() -> MarketPrices {
    MarketPrices::from_csv(PRICES_CSV).expect("bundled prices are valid")
}

/// Generator p ∈ [0, 10] kW, ramp 2 kW/step, p_init = 5, two one-hour steps.
pub fn toy_scenario() -> Scenario {
    parse_case(TOY_JSON).expect("bundled toy case is valid")
}

/// Random radial feeder for property tests and solver batteries: 2–33 buses,
/// 1–3 generators, 0–4 storages, T ∈ {4, 12, 24}. Impedances and loads are
/// small enough that holding every generator at `p_init` is always feasible.
pub fn random_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=33);
    let steps = *[4, 12, 24].choose(&mut rng).unwrap();
    let dt = *[0.5, 1.0].choose(&mut rng).unwrap();
    let lines = (2..=n)
        .map(|b| Line {
            from_bus: rng.gen_range(1..b),
            to_bus: b,
            r: rng.gen_range(0.0005..0.003),
            x: rng.gen_range(0.0..0.003),
        })
        .collect();
    let network = Network {
        buses: (1..=n).map(|id| Bus { id, name: None }).collect(),
        lines,
        u_min: 0.95 * 0.95,
        u_max: 1.05 * 1.05,
        s_base_kva: 1000.0,
        v_base_kv: 12.66,
    };
    let generators = (0..rng.gen_range(1..=3))
        .map(|_| {
            let p_min = rng.gen_range(0.0..20.0);
            let p_max = p_min + rng.gen_range(20.0..100.0);
            let q = rng.gen_range(0.0..10.0);
            Generator {
                bus: rng.gen_range(2..=n),
                p_min,
                p_max,
                q_min: -q,
                q_max: q,
                ramp_up: rng.gen_range(5.0..40.0),
                ramp_down: rng.gen_range(5.0..40.0),
                p_init: rng.gen_range(p_min..=p_max),
                marginal_cost: rng.gen_range(0.0..0.05),
            }
        })
        .collect();
    let storages = (0..rng.gen_range(0..=4))
        .map(|_| {
            let e_max = rng.gen_range(20.0..100.0);
            let e_min = rng.gen_range(0.0..0.2) * e_max;
            Storage {
                bus: rng.gen_range(2..=n),
                p_max: rng.gen_range(5.0..25.0),
                e_min,
                e_max,
                e_init: rng.gen_range(e_min..=e_max),
                kappa: 1.0,
            }
        })
        .collect();
    let mut profiles = Profiles::zeros(steps, dt, n);
    for t in 0..steps {
        for b in 1..n {
            profiles.load_p[t][b] = rng.gen_range(0.0..30.0);
            profiles.load_q[t][b] = rng.gen_range(0.0..10.0);
            if rng.gen_bool(0.3) {
                profiles.pv_p[t][b] = rng.gen_range(0.0..20.0);
            }
        }
    }
    let sc = Scenario {
        network,
        generators,
        storages,
        profiles,
    };
    sc.validate().expect("random scenario is structurally valid");
    sc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case33_shape() {
        let sc = case33();
        assert_eq!(sc.network.num_buses(), 33);
        assert_eq!(sc.network.lines.len(), 32);
        assert_eq!(sc.generators[0].bus, 5);
        let buses: Vec<usize> = sc.storages.iter().map(|e| e.bus).collect();
        assert_eq!(buses, vec![10, 13, 14, 24]);
        assert_eq!(sc.steps(), 24);
        assert_eq!(case33_prices().len(), 24);
    }
}
