use std::path::PathBuf;

use flexenv_core::assets::{case33, random_scenario};
use flexenv_core::netmodel::{load_case, parse_case, CaseError};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

#[test]
fn case33_from_disk_matches_bundled() {
    let sc = load_case(&data("case33.json"), None).unwrap();
    assert_eq!(sc, case33());
    assert_eq!(sc.network.num_buses(), 33);
    assert_eq!(sc.network.lines.len(), 32);
    let g = &sc.generators[0];
    assert_eq!((g.bus, g.p_min, g.p_max, g.ramp_up), (5, 80.0, 215.0, 100.0));
    for e in &sc.storages {
        assert_eq!((e.p_max, e.e_max, e.kappa), (12.5, 50.0, 1.0));
    }
    let peak = (0..24)
        .map(|t| sc.profiles.load_p[t].iter().sum::<f64>())
        .fold(0.0, f64::max);
    assert!(peak > 3715.0, "peak load {peak}");
}

#[test]
fn profiles_override_replaces_case_profiles() {
    let dir = std::env::temp_dir().join(format!("flexenv-case-io-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let csv = dir.join("flat.csv");
    std::fs::write(&csv, "t,bus,load_p_kw,load_q_kvar,pv_p_kw\n3,7,12.5,1,0\n").unwrap();
    let sc = load_case(&data("case33.json"), Some(&csv)).unwrap();
    assert_eq!(sc.profiles.load_p[2][6], 12.5);
    assert_eq!(sc.profiles.load_p[0].iter().sum::<f64>(), 0.0);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn written_case_round_trips() {
    for seed in 0..8 {
        let sc = random_scenario(seed);
        assert_eq!(parse_case(&sc.to_case_json()).unwrap(), sc, "seed {seed}");
    }
}

#[test]
fn missing_file_is_io_error() {
    let err = load_case(&data("nope.json"), None).unwrap_err();
    assert!(matches!(err, CaseError::Io { .. }));
}

#[test]
fn unknown_field_is_schema_error() {
    let text = case33().to_case_json().replacen("\"u_min\"", "\"v_min\"", 1);
    assert!(matches!(parse_case(&text), Err(CaseError::Json { .. })));
}
