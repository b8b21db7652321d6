use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Bus, Generator, Line, Network, Profiles, Scenario, Storage};

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("malformed case JSON at line {line}, column {column}: {msg}")]
    Json {
        line: usize,
        column: usize,
        msg: String,
    },
    #[error("{location}: {msg}")]
    Schema { location: String, msg: String },
    #[error("topology: {0}")]
    Topology(String),
    #[error("{location}: bus {bus} does not exist")]
    DanglingBus { location: String, bus: usize },
    #[error("profiles CSV line {line}: {msg}")]
    Profiles { line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn schema(location: impl Into<String>, msg: impl Into<String>) -> CaseError {
    CaseError::Schema {
        location: location.into(),
        msg: msg.into(),
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCase {
    network: RawNetwork,
    #[serde(default)]
    generators: Vec<RawGenerator>,
    #[serde(default)]
    storages: Vec<RawStorage>,
    horizon: RawHorizon,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    profiles: Option<Vec<ProfileRow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    profiles_csv: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    s_base_kva: f64,
    v_base_kv: f64,
    u_min: f64,
    u_max: f64,
    buses: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bus_names: Option<Vec<Option<String>>>,
    lines: Vec<RawLine>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLine {
    from: usize,
    to: usize,
    r_pu: f64,
    x_pu: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGenerator {
    bus: usize,
    p_min_kw: f64,
    p_max_kw: f64,
    q_min_kvar: f64,
    q_max_kvar: f64,
    ramp_up_kw: f64,
    ramp_down_kw: f64,
    p_init_kw: f64,
    cost_per_kwh: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStorage {
    bus: usize,
    p_max_kw: f64,
    e_min_kwh: f64,
    e_max_kwh: f64,
    e_init_kwh: f64,
    #[serde(default = "one")]
    kappa: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHorizon {
    steps: usize,
    dt_hours: f64,
}

/// One row of the profile table; shared by the CSV and the inline form.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileRow {
    t: usize,
    bus: usize,
    #[serde(default)]
    load_p_kw: f64,
    #[serde(default)]
    load_q_kvar: f64,
    #[serde(default)]
    pv_p_kw: f64,
}

/// Parses a case document. A `profiles_csv` reference is resolved against
/// `base_dir`; without a base dir such a reference is an error.
pub fn parse_case(text: &str) -> Result<Scenario, CaseError> {
    parse_case_in(text, None, None)
}

/// Parses a case document with profiles supplied as CSV text.
pub fn parse_case_with_profiles(text: &str, profiles_csv: &str) -> Result<Scenario, CaseError> {
    parse_case_in(text, None, Some(profiles_csv))
}

/// Reads a case file, resolving a companion profiles CSV relative to it.
/// `profiles_override` replaces whatever profiles the case declares.
pub fn load_case(path: &Path, profiles_override: Option<&Path>) -> Result<Scenario, CaseError> {
    let text = std::fs::read_to_string(path).map_err(|source| CaseError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let csv = match profiles_override {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|source| CaseError::Io {
            path: p.to_path_buf(),
            source,
        })?),
        None => None,
    };
    parse_case_in(&text, path.parent(), csv.as_deref())
}

pub(crate) fn parse_case_in(
    text: &str,
    base_dir: Option<&Path>,
    profiles_csv_text: Option<&str>,
) -> Result<Scenario, CaseError> {
    let raw: RawCase = serde_json::from_str(text).map_err(|e| CaseError::Json {
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    })?;

    let h = &raw.horizon;
    if !(h.dt_hours > 0.0) || !h.dt_hours.is_finite() {
        return Err(schema("horizon.dt_hours", format!("must be positive, got {}", h.dt_hours)));
    }
    if h.steps < 2 {
        return Err(schema("horizon.steps", format!("need at least 2 steps, got {}", h.steps)));
    }

    let n = raw.network.buses.len();
    let names = match &raw.network.bus_names {
        Some(v) if v.len() != n => {
            return Err(schema(
                "network.bus_names",
                format!("{} names for {} buses", v.len(), n),
            ))
        }
        Some(v) => v.clone(),
        None => vec![None; n],
    };
    let network = Network {
        buses: raw
            .network
            .buses
            .iter()
            .zip(names)
            .map(|(&id, name)| Bus { id, name })
            .collect(),
        lines: raw
            .network
            .lines
            .iter()
            .map(|l| Line {
                from_bus: l.from,
                to_bus: l.to,
                r: l.r_pu,
                x: l.x_pu,
            })
            .collect(),
        u_min: raw.network.u_min,
        u_max: raw.network.u_max,
        s_base_kva: raw.network.s_base_kva,
        v_base_kv: raw.network.v_base_kv,
    };

    let generators = raw
        .generators
        .iter()
        .map(|g| Generator {
            bus: g.bus,
            p_min: g.p_min_kw,
            p_max: g.p_max_kw,
            q_min: g.q_min_kvar,
            q_max: g.q_max_kvar,
            ramp_up: g.ramp_up_kw,
            ramp_down: g.ramp_down_kw,
            p_init: g.p_init_kw,
            marginal_cost: g.cost_per_kwh,
        })
        .collect();
    let storages = raw
        .storages
        .iter()
        .map(|e| Storage {
            bus: e.bus,
            p_max: e.p_max_kw,
            e_min: e.e_min_kwh,
            e_max: e.e_max_kwh,
            e_init: e.e_init_kwh,
            kappa: e.kappa,
        })
        .collect();

    let mut profiles = Profiles::zeros(h.steps, h.dt_hours, n);
    if let Some(csv_text) = profiles_csv_text {
        fill_profiles_csv(&mut profiles, csv_text)?;
    } else if let Some(rows) = &raw.profiles {
        for (i, row) in rows.iter().enumerate() {
            apply_row(&mut profiles, row).map_err(|msg| schema(format!("profiles[{i}]"), msg))?;
        }
    } else if let Some(rel) = &raw.profiles_csv {
        let Some(dir) = base_dir else {
            return Err(schema(
                "profiles_csv",
                "companion CSV referenced but no base directory is known",
            ));
        };
        let path = dir.join(rel);
        let text = std::fs::read_to_string(&path).map_err(|source| CaseError::Io {
            path: path.clone(),
            source,
        })?;
        fill_profiles_csv(&mut profiles, &text)?;
    }

    let sc = Scenario {
        network,
        generators,
        storages,
        profiles,
    };
    validate(&sc)?;
    Ok(sc)
}

fn apply_row(p: &mut Profiles, row: &ProfileRow) -> Result<(), String> {
    if row.t == 0 || row.t > p.steps {
        return Err(format!("step {} outside 1..={}", row.t, p.steps));
    }
    let nb = p.load_p[0].len();
    if row.bus == 0 || row.bus > nb {
        return Err(format!("bus {} outside 1..={}", row.bus, nb));
    }
    let (t, b) = (row.t - 1, row.bus - 1);
    p.load_p[t][b] = row.load_p_kw;
    p.load_q[t][b] = row.load_q_kvar;
    p.pv_p[t][b] = row.pv_p_kw;
    Ok(())
}

fn fill_profiles_csv(p: &mut Profiles, text: &str) -> Result<(), CaseError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| CaseError::Profiles {
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    let expected = ["t", "bus", "load_p_kw", "load_q_kvar", "pv_p_kw"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(CaseError::Profiles {
            line: 1,
            msg: format!("expected header {}", expected.join(",")),
        });
    }
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CaseError::Profiles {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let row: ProfileRow = rec
            .deserialize(Some(&headers))
            .map_err(|e| CaseError::Profiles { line, msg: e.to_string() })?;
        apply_row(p, &row).map_err(|msg| CaseError::Profiles { line, msg })?;
    }
    Ok(())
}

/// Parses a standalone profiles CSV for a network with `num_buses` buses.
pub fn parse_profiles_csv(
    text: &str,
    steps: usize,
    dt: f64,
    num_buses: usize,
) -> Result<Profiles, CaseError> {
    let mut p = Profiles::zeros(steps, dt, num_buses);
    fill_profiles_csv(&mut p, text)?;
    Ok(p)
}

pub(crate) fn validate(sc: &Scenario) -> Result<(), CaseError> {
    let net = &sc.network;
    let n = net.buses.len();
    if n == 0 {
        return Err(schema("network.buses", "no buses"));
    }
    for (i, b) in net.buses.iter().enumerate() {
        if b.id != i + 1 {
            return Err(schema(
                format!("network.buses[{i}]"),
                format!("ids must be 1..N in order; found {}", b.id),
            ));
        }
    }
    for (k, v) in [("s_base_kva", net.s_base_kva), ("v_base_kv", net.v_base_kv)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(schema(format!("network.{k}"), format!("must be positive, got {v}")));
        }
    }
    if !(net.u_min > 0.0 && net.u_min < net.u_max && net.u_max.is_finite()) {
        return Err(schema(
            "network.u_min/u_max",
            format!("need 0 < u_min < u_max, got {} / {}", net.u_min, net.u_max),
        ));
    }
    for (i, l) in net.lines.iter().enumerate() {
        let loc = format!("network.lines[{i}]");
        for bus in [l.from_bus, l.to_bus] {
            if bus == 0 || bus > n {
                return Err(CaseError::DanglingBus { location: loc, bus });
            }
        }
        if l.from_bus == l.to_bus {
            return Err(schema(loc, "self-loop"));
        }
        if !(l.r >= 0.0 && l.x >= 0.0) || !l.r.is_finite() || !l.x.is_finite() {
            return Err(schema(loc, format!("r, x must be >= 0, got {}, {}", l.r, l.x)));
        }
    }
    check_tree(net)?;

    for (i, g) in sc.generators.iter().enumerate() {
        let loc = format!("generators[{i}]");
        if g.bus == 0 || g.bus > n {
            return Err(CaseError::DanglingBus { location: loc, bus: g.bus });
        }
        let fields = [g.p_min, g.p_max, g.q_min, g.q_max, g.ramp_up, g.ramp_down, g.p_init, g.marginal_cost];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(schema(loc, "non-finite value"));
        }
        if g.p_min > g.p_max || g.q_min > g.q_max {
            return Err(schema(loc, "inverted limits"));
        }
        if g.p_init < g.p_min || g.p_init > g.p_max {
            return Err(schema(loc, format!("p_init {} outside [{}, {}]", g.p_init, g.p_min, g.p_max)));
        }
        if g.ramp_up < 0.0 || g.ramp_down < 0.0 {
            return Err(schema(loc, "negative ramp limit"));
        }
    }
    for (i, e) in sc.storages.iter().enumerate() {
        let loc = format!("storages[{i}]");
        if e.bus == 0 || e.bus > n {
            return Err(CaseError::DanglingBus { location: loc, bus: e.bus });
        }
        let fields = [e.p_max, e.e_min, e.e_max, e.e_init, e.kappa];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(schema(loc, "non-finite value"));
        }
        if e.p_max < 0.0 {
            return Err(schema(loc, "negative power rating"));
        }
        if e.e_init < e.e_min || e.e_init > e.e_max {
            return Err(schema(loc, format!("e_init {} outside [{}, {}]", e.e_init, e.e_min, e.e_max)));
        }
        if !(e.kappa > 0.0) {
            return Err(schema(loc, "kappa must be positive"));
        }
    }

    let p = &sc.profiles;
    if p.steps < 2 {
        return Err(schema("horizon.steps", "need at least 2 steps"));
    }
    if !(p.dt > 0.0) || !p.dt.is_finite() {
        return Err(schema("horizon.dt_hours", "must be positive"));
    }
    for (name, series) in [("load_p", &p.load_p), ("load_q", &p.load_q), ("pv_p", &p.pv_p)] {
        if series.len() != p.steps || series.iter().any(|r| r.len() != n) {
            return Err(schema("profiles", format!("{name} must be {} x {}", p.steps, n)));
        }
        for (t, row) in series.iter().enumerate() {
            for (b, &v) in row.iter().enumerate() {
                let bad = !v.is_finite() || (name != "load_q" && v < 0.0);
                if bad {
                    return Err(schema(
                        format!("profiles t={} bus={}", t + 1, b + 1),
                        format!("{name} = {v} is invalid"),
                    ));
                }
            }
        }
    }
    Ok(())
}

fn check_tree(net: &Network) -> Result<(), CaseError> {
    let n = net.buses.len();
    if net.lines.len() != n - 1 {
        return Err(CaseError::Topology(format!(
            "a radial network with {} buses needs {} lines, found {}",
            n,
            n - 1,
            net.lines.len()
        )));
    }
    let mut adj = vec![Vec::new(); n + 1];
    for l in &net.lines {
        adj[l.from_bus].push(l.to_bus);
        adj[l.to_bus].push(l.from_bus);
    }
    let mut seen = HashSet::from([1usize]);
    let mut stack = vec![1usize];
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if seen.insert(v) {
                stack.push(v);
            }
        }
    }
    if seen.len() != n {
        let missing = (1..=n).find(|b| !seen.contains(b)).unwrap_or(0);
        return Err(CaseError::Topology(format!(
            "bus {missing} is not connected to bus 1 (the network contains a cycle or an island)"
        )));
    }
    Ok(())
}

impl Scenario {
    /// Serializes to the case format with inline profiles; zero rows are
    /// omitted since missing rows read back as zero.
    pub fn to_case_json(&self) -> String {
        let net = &self.network;
        let names: Vec<Option<String>> = net.buses.iter().map(|b| b.name.clone()).collect();
        let mut rows = Vec::new();
        let p = &self.profiles;
        for t in 0..p.steps {
            for b in 0..net.buses.len() {
                let (lp, lq, pv) = (p.load_p[t][b], p.load_q[t][b], p.pv_p[t][b]);
                if lp != 0.0 || lq != 0.0 || pv != 0.0 {
                    rows.push(ProfileRow {
                        t: t + 1,
                        bus: b + 1,
                        load_p_kw: lp,
                        load_q_kvar: lq,
                        pv_p_kw: pv,
                    });
                }
            }
        }
        let raw = RawCase {
            network: RawNetwork {
                s_base_kva: net.s_base_kva,
                v_base_kv: net.v_base_kv,
                u_min: net.u_min,
                u_max: net.u_max,
                buses: net.buses.iter().map(|b| b.id).collect(),
                bus_names: names.iter().any(|n| n.is_some()).then_some(names),
                lines: net
                    .lines
                    .iter()
                    .map(|l| RawLine {
                        from: l.from_bus,
                        to: l.to_bus,
                        r_pu: l.r,
                        x_pu: l.x,
                    })
                    .collect(),
            },
            generators: self
                .generators
                .iter()
                .map(|g| RawGenerator {
                    bus: g.bus,
                    p_min_kw: g.p_min,
                    p_max_kw: g.p_max,
                    q_min_kvar: g.q_min,
                    q_max_kvar: g.q_max,
                    ramp_up_kw: g.ramp_up,
                    ramp_down_kw: g.ramp_down,
                    p_init_kw: g.p_init,
                    cost_per_kwh: g.marginal_cost,
                })
                .collect(),
            storages: self
                .storages
                .iter()
                .map(|e| RawStorage {
                    bus: e.bus,
                    p_max_kw: e.p_max,
                    e_min_kwh: e.e_min,
                    e_max_kwh: e.e_max,
                    e_init_kwh: e.e_init,
                    kappa: e.kappa,
                })
                .collect(),
            horizon: RawHorizon {
                steps: p.steps,
                dt_hours: p.dt,
            },
            profiles: Some(rows),
            profiles_csv: None,
        };
        serde_json::to_string_pretty(&raw).expect("case serialization cannot fail")
    }

    /// Profile table in the companion CSV layout (every (t, bus) row).
    pub fn profiles_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let p = &self.profiles;
        for t in 0..p.steps {
            for b in 0..self.network.buses.len() {
                w.serialize(ProfileRow {
                    t: t + 1,
                    bus: b + 1,
                    load_p_kw: p.load_p[t][b],
                    load_q_kvar: p.load_q[t][b],
                    pv_p_kw: p.pv_p[t][b],
                })
                .expect("in-memory csv");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"{
        "network": {"s_base_kva": 1000, "v_base_kv": 12.66, "u_min": 0.9025, "u_max": 1.1025,
                    "buses": [1, 2], "lines": [{"from": 1, "to": 2, "r_pu": 0.1, "x_pu": 0.1}]},
        "generators": [{"bus": 2, "p_min_kw": 0, "p_max_kw": 10, "q_min_kvar": 0, "q_max_kvar": 0,
                        "ramp_up_kw": 2, "ramp_down_kw": 2, "p_init_kw": 5, "cost_per_kwh": 0}],
        "horizon": {"steps": 2, "dt_hours": 1.0}
    }"#;

    #[test]
    fn minimal_case_parses() {
        let sc = parse_case(MINIMAL).unwrap();
        assert_eq!(sc.network.num_buses(), 2);
        assert_eq!(sc.network.lines.len(), 1);
        assert_eq!(sc.generators.len(), 1);
        assert!(sc.storages.is_empty());
        assert_eq!(sc.profiles.load_p, vec![vec![0.0, 0.0]; 2]);
    }

    #[test]
    fn cycle_is_rejected() {
        let text = MINIMAL.replace(
            r#"[{"from": 1, "to": 2, "r_pu": 0.1, "x_pu": 0.1}]"#,
            r#"[{"from": 1, "to": 2, "r_pu": 0.1, "x_pu": 0.1}, {"from": 2, "to": 1, "r_pu": 0.1, "x_pu": 0.1}]"#,
        );
        assert!(matches!(parse_case(&text), Err(CaseError::Topology(_))));
    }

    #[test]
    fn island_with_right_line_count_is_rejected() {
        let text = r#"{
            "network": {"s_base_kva": 1000, "v_base_kv": 1, "u_min": 0.9, "u_max": 1.1,
                        "buses": [1, 2, 3, 4],
                        "lines": [{"from": 1, "to": 2, "r_pu": 0.1, "x_pu": 0},
                                  {"from": 3, "to": 4, "r_pu": 0.1, "x_pu": 0},
                                  {"from": 4, "to": 3, "r_pu": 0.1, "x_pu": 0}]},
            "horizon": {"steps": 2, "dt_hours": 1}
        }"#;
        let err = parse_case(text).unwrap_err();
        assert!(err.to_string().contains("bus 3"), "{err}");
    }

    #[test]
    fn dangling_device_bus_reports_location() {
        let text = MINIMAL.replace(r#""bus": 2, "p_min_kw""#, r#""bus": 7, "p_min_kw""#);
        let err = parse_case(&text).unwrap_err();
        assert!(matches!(err, CaseError::DanglingBus { bus: 7, .. }));
        assert!(err.to_string().contains("generators[0]"));
    }

    #[test]
    fn nonpositive_dt_is_rejected() {
        let text = MINIMAL.replace(r#""dt_hours": 1.0"#, r#""dt_hours": 0"#);
        let err = parse_case(&text).unwrap_err();
        assert!(err.to_string().contains("dt_hours"));
    }

    #[test]
    fn json_error_carries_position() {
        let err = parse_case("{\n  \"network\": ").unwrap_err();
        assert!(matches!(err, CaseError::Json { line: 2, .. }));
    }

    #[test]
    fn csv_profiles_fill_and_default_to_zero() {
        let csv = "t,bus,load_p_kw,load_q_kvar,pv_p_kw\n2,2,3.5,1.0,0.5\n";
        let p = parse_profiles_csv(csv, 2, 1.0, 2).unwrap();
        assert_eq!(p.load_p[1][1], 3.5);
        assert_eq!(p.pv_p[1][1], 0.5);
        assert_eq!(p.load_p[0][1], 0.0);
        assert!(parse_profiles_csv("t,bus,x\n", 2, 1.0, 2).is_err());
        assert!(parse_profiles_csv("t,bus,load_p_kw,load_q_kvar,pv_p_kw\n3,1,0,0,0\n", 2, 1.0, 2).is_err());
    }

    #[test]
    fn round_trip() {
        let mut sc = parse_case(MINIMAL).unwrap();
        sc.profiles.load_p[0][1] = 1.25;
        sc.profiles.pv_p[1][1] = 0.3;
        sc.network.buses[1].name = Some("feeder end".into());
        let back = parse_case(&sc.to_case_json()).unwrap();
        assert_eq!(back, sc);
    }
}
