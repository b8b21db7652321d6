//! Network, device and profile data model.
//!
//! Devices and profiles are expressed in kW / kvar / kWh. Network quantities
//! (impedances, squared voltages) are per-unit on `s_base_kva`; conversion
//! happens in [`Network::kw_to_pu`] and nowhere else.

mod case;
mod sensitivity;

pub use case::{load_case, parse_case, parse_case_with_profiles, parse_profiles_csv, CaseError};
pub use sensitivity::{
    sensitivity_matrices, uncertainty_margins, voltage_profile, NetworkError, RobustMargins,
    SensitivityMatrices, UncertaintySpec,
};

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    /// 1-based id; bus 1 is the grid connection point and voltage reference.
    pub id: usize,
    pub name: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from_bus: usize,
    pub to_bus: usize,
    /// Resistance, per-unit.
    pub r: f64,
    /// Reactance, per-unit.
    pub x: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    /// Squared-voltage bounds, per-unit squared.
    pub u_min: f64,
    pub u_max: f64,
    pub s_base_kva: f64,
    pub v_base_kv: f64,
}

impl Network {
    pub fn num_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn kw_to_pu(&self, kw: f64) -> f64 {
        kw / self.s_base_kva
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
    /// Largest increase per step, kW.
    pub ramp_up: f64,
    /// Largest decrease per step, kW.
    pub ramp_down: f64,
    pub p_init: f64,
    /// $/kWh.
    pub marginal_cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Storage {
    pub bus: usize,
    /// Symmetric charge/discharge limit, kW. Positive power discharges.
    pub p_max: f64,
    pub e_min: f64,
    pub e_max: f64,
    pub e_init: f64,
    pub kappa: f64,
}

/// Exogenous time series, indexed `[step][bus - 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profiles {
    pub steps: usize,
    pub dt: f64,
    pub load_p: Vec<Vec<f64>>,
    pub load_q: Vec<Vec<f64>>,
    pub pv_p: Vec<Vec<f64>>,
}

impl Profiles {
    pub fn zeros(steps: usize, dt: f64, num_buses: usize) -> Self {
        let z = vec![vec![0.0; num_buses]; steps];
        Self {
            steps,
            dt,
            load_p: z.clone(),
            load_q: z.clone(),
            pv_p: z,
        }
    }

    /// Net active injection of the exogenous series at `(step, bus index)`, kW.
    pub fn net_p(&self, t: usize, b: usize) -> f64 {
        self.pv_p[t][b] - self.load_p[t][b]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub network: Network,
    pub generators: Vec<Generator>,
    pub storages: Vec<Storage>,
    pub profiles: Profiles,
}

impl Scenario {
    pub fn steps(&self) -> usize {
        self.profiles.steps
    }

    pub fn dt(&self) -> f64 {
        self.profiles.dt
    }

    /// Copy with every storage power and energy rating multiplied by `factor`.
    pub fn with_storage_scaled(&self, factor: f64) -> Scenario {
        let mut s = self.clone();
        for e in &mut s.storages {
            e.p_max *= factor;
            e.e_min *= factor;
            e.e_max *= factor;
            e.e_init *= factor;
        }
        s
    }

    /// Checks every structural invariant; parsing calls this on its result.
    pub fn validate(&self) -> Result<(), CaseError> {
        case::validate(self)
    }
}
