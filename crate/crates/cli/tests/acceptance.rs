//! Acceptance battery. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any failed.

use std::fs;
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use flexenv_cli::sweep;
use flexenv_core::assets::{case33, case33_prices, random_scenario, toy_scenario};
use flexenv_core::disagg::{realized_soc, sample_trajectories, Disaggregator, SamplerConfig};
use flexenv_core::envelope::{solve_envelope, EnvelopeKind, EnvelopeOptions, EnvelopeSolution};
use flexenv_core::lp::{ExternalSolver, SimplexSolver};
use flexenv_core::market::{solve_market, MarketOptions};
use flexenv_core::netmodel::{uncertainty_margins, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn solve(sc: &Scenario, opts: &EnvelopeOptions) -> Result<EnvelopeSolution, String> {
    solve_envelope(sc, opts, &SimplexSolver::default()).map_err(|e| e.to_string())
}

fn opts(kind: EnvelopeKind) -> EnvelopeOptions {
    EnvelopeOptions::new(kind)
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("flexenv-acceptance-{}-{name}", std::process::id()));
    fs::create_dir_all(&d).unwrap();
    d
}

fn flexenv(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_flexenv"))
        .env("FLEXENV_LOG", "error")
        .args(args)
        .output()
        .expect("flexenv binary runs")
}

fn toy_area() -> Outcome {
    let start = Instant::now();
    let sc = toy_scenario();
    let mut got = Vec::new();
    for (kind, want) in [
        (EnvelopeKind::Baseline, 4.0),
        (EnvelopeKind::NoRamp, 20.0),
        (EnvelopeKind::PreRamp, 4.0),
    ] {
        let a = solve(&sc, &opts(kind))?.area_kwh;
        ensure((a - want).abs() <= 1e-6, || format!("{} area {a}, expected {want}", kind.name()))?;
        got.push(format!("{}={a:.6}", kind.name()));
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    let cli = flexenv(&["envelope", "--case", &toy_path(), "--model", "baseline", "--out", scratch("c1").to_str().unwrap()]);
    let printed = String::from_utf8_lossy(&cli.stdout).trim().to_string();
    ensure(printed == "4.000000", || format!("cli printed {printed:?}"))?;
    Ok(format!("{} in {elapsed:.2?}", got.join(" ")))
}

fn toy_path() -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/data/toy.json")
        .to_string_lossy()
        .into_owned()
}

fn ordering() -> Outcome {
    let start = Instant::now();
    let (mut buses, mut steps) = (Vec::new(), Vec::new());
    let n = 24;
    for seed in 1000..1000 + n {
        let sc = random_scenario(seed);
        buses.push(sc.network.num_buses());
        steps.push(sc.steps());
        let b = solve(&sc, &opts(EnvelopeKind::Baseline))?.area_kwh;
        let p = solve(&sc, &opts(EnvelopeKind::PreRamp))?.area_kwh;
        let r = solve(&sc, &opts(EnvelopeKind::NoRamp))?.area_kwh;
        ensure(r + 1e-6 >= p && p + 1e-6 >= b, || {
            format!("seed {seed}: noramp {r}, preramp {p}, baseline {b}")
        })?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(120), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{n} scenarios, {}-{} buses, T in {:?}, in {elapsed:.2?}",
        buses.iter().min().unwrap(),
        buses.iter().max().unwrap(),
        {
            let mut s = steps.clone();
            s.sort();
            s.dedup();
            s
        }
    ))
}

fn disaggregation_guarantee() -> Outcome {
    let start = Instant::now();
    let mut msgs = Vec::new();
    for model in ["baseline", "preramp"] {
        let out = scratch(&format!("c3-{model}"));
        let o = flexenv(&[
            "verify", "--model", model, "--vertices", "1000", "--samples", "4000", "--seed", "42", "--out",
            out.to_str().unwrap(),
        ]);
        let text = String::from_utf8_lossy(&o.stdout).trim().to_string();
        ensure(o.status.code() == Some(0) && text == "5000/5000 feasible", || {
            format!("{model}: exit {:?}, {text}", o.status.code())
        })?;
        msgs.push(format!("{model} {text}"));
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(300), || format!("took {elapsed:?}"))?;
    Ok(format!("{} in {elapsed:.2?}", msgs.join(", ")))
}

fn noramp_counterexample() -> Outcome {
    let sc = toy_scenario();
    let env = solve(&sc, &opts(EnvelopeKind::NoRamp))?;
    let g = &sc.generators[0];
    let ess: f64 = sc.storages.iter().map(|e| e.p_max).sum();
    let wide = (0..env.steps).any(|t| env.gcp_up[t] - env.gcp_dn[t] > g.ramp_up + ess);
    ensure(wide, || "envelope width never exceeds ramp plus storage power".into())?;
    let out = scratch("c4");
    let o = flexenv(&["verify", "--case", &toy_path(), "--model", "noramp", "--out", out.to_str().unwrap()]);
    ensure(o.status.code() == Some(3), || format!("exit {:?}", o.status.code()))?;
    let samples = fs::read_to_string(out.join("verify_samples.csv")).map_err(|e| e.to_string())?;
    let bad_vertices = samples.lines().filter(|l| l.contains(",vertex,0,")).count();
    ensure(bad_vertices >= 1, || "no infeasible vertex trajectory".into())?;
    Ok(format!(
        "exit 3, {bad_vertices} infeasible vertex trajectories, {}",
        String::from_utf8_lossy(&o.stdout).lines().next().unwrap_or("")
    ))
}

fn ess_trend() -> Outcome {
    let res = sweep::ess_scale(&case33(), &opts(EnvelopeKind::Baseline), &[1.0, 2.0, 3.0, 5.0], &SimplexSolver::default());
    let mut pct = Vec::new();
    for p in &res.points {
        pct.push(p.improvement_pct().ok_or_else(|| format!("scale {} failed", p.value))?);
    }
    ensure(pct.iter().all(|&v| v > 0.0), || format!("nonpositive improvement {pct:?}"))?;
    ensure(pct.windows(2).all(|w| w[1] >= w[0] - 0.1), || format!("not nondecreasing {pct:?}"))?;
    Ok(pct.iter().map(|v| format!("{v:+.1}%")).collect::<Vec<_>>().join(" -> "))
}

/// Largest violation of the tightened voltage band over sampled
/// disaggregations, including the pre-ramped points.
fn worst_voltage_excess(sc: &Scenario, env: &EnvelopeSolution) -> Result<f64, String> {
    let sens = env.options.sensitivities(sc).map_err(|e| e.to_string())?;
    let m = uncertainty_margins(&sens, &sc.profiles, &env.options.uncertainty).map_err(|e| e.to_string())?;
    let d = Disaggregator::new(sc, env).map_err(|e| e.to_string())?;
    let net = &sc.network;
    let mut worst: f64 = f64::NEG_INFINITY;
    let cfg = SamplerConfig {
        n_vertex: 200,
        n_uniform: 200,
        seed: 5,
    };
    for s in sample_trajectories(env, &cfg) {
        let (res, _) = d.run(&s.values).map_err(|e| e.to_string())?;
        for u in std::iter::once(&res.u).chain(res.u_pre.as_ref()) {
            for t in 0..env.steps {
                for i in 1..net.num_buses() {
                    let du = m.delta_u[t][i - 1];
                    worst = worst.max(net.u_min + du - u[t][i]).max(u[t][i] - (net.u_max - du));
                }
            }
        }
    }
    Ok(worst)
}

fn robust_trend() -> Outcome {
    let sc = case33();
    let grid = [0.0, 0.03, 0.05, 0.10];
    let res = sweep::alpha(&sc, &opts(EnvelopeKind::Baseline), &grid, &SimplexSolver::default());
    let mut summary = Vec::new();
    let mut worst: f64 = f64::NEG_INFINITY;
    for (label, pick) in [("baseline", 0), ("preramp", 1)] {
        let mut areas = Vec::new();
        for p in &res.points {
            let env = if pick == 0 { &p.baseline } else { &p.preramp };
            let env = env.as_ref().map_err(|e| format!("{label} alpha {}: {e}", p.value))?;
            areas.push(env.area_kwh);
            worst = worst.max(worst_voltage_excess(&sc, env)?);
        }
        ensure(areas.windows(2).all(|w| w[1] <= w[0] + 1e-6), || format!("{label} areas {areas:?}"))?;
        summary.push(format!(
            "{label} {}",
            areas.iter().map(|a| format!("{a:.2}")).collect::<Vec<_>>().join(" >= ")
        ));
    }
    ensure(worst <= 1e-7, || format!("voltage outside tightened band by {worst:e}"))?;
    Ok(format!("{}; worst band excess {worst:.1e}", summary.join("; ")))
}

fn market_direction() -> Outcome {
    // nonnegative FRP rows cannot follow the bundled profile's hourly
    // net-load swings, so the case runs with signed FRP quantities
    let m = MarketOptions {
        frp_nonnegative: false,
    };
    let prices = case33_prices();
    let mut rows = Vec::new();
    for scale in [1.0, 2.0, 3.0, 5.0] {
        let sc = case33().with_storage_scaled(scale);
        let mut obj = Vec::new();
        for kind in [EnvelopeKind::Baseline, EnvelopeKind::PreRamp] {
            let s = solve_market(&sc, &prices, &opts(kind), &m, &SimplexSolver::default()).map_err(|e| e.to_string())?;
            let lhs = s.objective;
            let rhs = s.cost_energy - s.revenue();
            ensure((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0), || format!("identity {lhs} vs {rhs}"))?;
            obj.push(lhs);
        }
        ensure(obj[1] <= obj[0] + 1e-9 * obj[0].abs().max(1.0), || {
            format!("x{scale}: preramp {} > baseline {}", obj[1], obj[0])
        })?;
        rows.push(format!("x{scale}: {:.2}/{:.2}", obj[0], obj[1]));
    }
    // the nonnegative variant on scenarios where it is feasible
    let mut clamped = 0;
    for seed in 0..8 {
        let sc = random_scenario(seed);
        let p = flexenv_core::market::MarketPrices {
            energy: vec![0.03; sc.steps()],
            reserve_up: vec![0.02; sc.steps()],
            reserve_dn: vec![0.02; sc.steps()],
            frp: vec![0.00544; sc.steps()],
        };
        let run = |k| solve_market(&sc, &p, &opts(k), &MarketOptions::default(), &SimplexSolver::default());
        if let (Ok(b), Ok(pr)) = (run(EnvelopeKind::Baseline), run(EnvelopeKind::PreRamp)) {
            ensure(pr.objective <= b.objective + 1e-9 * b.objective.abs().max(1.0), || {
                format!("seed {seed}: preramp {} > baseline {}", pr.objective, b.objective)
            })?;
            clamped += 1;
        }
    }
    Ok(format!("baseline/preramp objective {}; {clamped} clamped-FRP scenarios agree", rows.join(", ")))
}

fn sandwich_and_corners() -> Outcome {
    let sc = case33();
    let env = solve(&sc, &opts(EnvelopeKind::Baseline))?;
    let d = Disaggregator::new(&sc, &env).map_err(|e| e.to_string())?;
    let dt = sc.dt();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = f64::NEG_INFINITY;
    let n = 10_000;
    for _ in 0..n {
        let lam: Vec<f64> = (0..env.steps).map(|_| rng.gen()).collect();
        let res = d.interpolate(&lam);
        for (e, ess) in sc.storages.iter().enumerate() {
            let dev = &env.storages[e];
            let hi = realized_soc(ess.e_init, 1.0, &dev.p_dn, dt);
            let lo = realized_soc(ess.e_init, 1.0, &dev.p_up, dt);
            for t in 0..env.steps {
                let s = res.soc[e][t];
                worst = worst.max(lo[t] - s).max(s - hi[t]).max(ess.e_min - s).max(s - ess.e_max);
            }
        }
        for (g, gen) in sc.generators.iter().enumerate() {
            let p = &res.pg[g];
            worst = worst.max(p[0] - gen.p_init - gen.ramp_up).max(gen.p_init - p[0] - gen.ramp_down);
            for t in 1..env.steps {
                worst = worst.max(p[t] - p[t - 1] - gen.ramp_up).max(p[t - 1] - p[t] - gen.ramp_down);
            }
        }
    }
    ensure(worst <= 1e-9, || format!("worst violation {worst:e}"))?;
    Ok(format!("{n} interpolations, worst slack {worst:.1e}"))
}

fn highs() -> Option<ExternalSolver> {
    let script = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scripts/highs_solve.py");
    let ok = Command::new("python3")
        .args(["-c", "import scipy.optimize"])
        .status()
        .map(|s| s.success())
        .unwrap_or(false);
    (ok && script.exists()).then(|| ExternalSolver::new(script))
}

fn solver_cross_check() -> Outcome {
    let mut battery: Vec<(String, Scenario)> = vec![("toy".into(), toy_scenario()), ("case33".into(), case33())];
    for seed in 0..6 {
        battery.push((format!("random{seed}"), random_scenario(seed)));
    }
    let bundled = SimplexSolver::default();
    let external = highs();
    let mut worst_rel: f64 = 0.0;
    let mut count = 0;
    let compare = |name: &str, a: f64, b: f64, worst: &mut f64| -> Result<(), String> {
        let rel = (a - b).abs() / a.abs().max(b.abs()).max(1.0);
        *worst = worst.max(rel);
        ensure(rel <= 1e-6, || format!("{name}: bundled {a} vs external {b}"))
    };
    for (name, sc) in &battery {
        for kind in EnvelopeKind::ALL {
            let o = opts(kind);
            let a = solve_envelope(sc, &o, &bundled).map_err(|e| e.to_string())?;
            let again = solve_envelope(sc, &o, &bundled).map_err(|e| e.to_string())?;
            ensure(a.to_json() == again.to_json(), || format!("{name} {}: nondeterministic", kind.name()))?;
            if let Some(ext) = &external {
                let b = solve_envelope(sc, &o, ext).map_err(|e| e.to_string())?;
                compare(&format!("{name} {}", kind.name()), a.area_kwh, b.area_kwh, &mut worst_rel)?;
            }
            count += 1;
        }
    }
    let m = MarketOptions {
        frp_nonnegative: false,
    };
    for kind in [EnvelopeKind::Baseline, EnvelopeKind::PreRamp] {
        let a = solve_market(&case33(), &case33_prices(), &opts(kind), &m, &bundled).map_err(|e| e.to_string())?;
        if let Some(ext) = &external {
            let b = solve_market(&case33(), &case33_prices(), &opts(kind), &m, ext).map_err(|e| e.to_string())?;
            compare(&format!("market {}", kind.name()), a.objective, b.objective, &mut worst_rel)?;
        }
        count += 1;
    }
    Ok(match external {
        Some(_) => format!("{count} models match HiGHS, worst relative gap {worst_rel:.1e}; bundled runs deterministic"),
        None => format!("external solver unavailable, skipped; {count} bundled runs deterministic"),
    })
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("toy analytic envelope", toy_area),
        ("ordering noramp >= preramp >= baseline", ordering),
        ("case33 disaggregation guarantee", disaggregation_guarantee),
        ("noramp counterexample", noramp_counterexample),
        ("storage-rating trend", ess_trend),
        ("robust trend and tightened voltages", robust_trend),
        ("market direction and accounting", market_direction),
        ("sandwich and corner properties", sandwich_and_corners),
        ("solver cross-check", solver_cross_check),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({detail})", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
