//! Acceptance criteria for the release build of the simulator.
//!
//! Each criterion prints one `PASS`/`FAIL` line; the test fails if any
//! criterion does. Run with `--nocapture` to see the lines. All tolerances
//! and runtime ceilings are the constants below.

use std::f64::consts::{FRAC_PI_8, SQRT_2};
use std::process::Command;
use std::time::{Duration, Instant};

use bellwigner::chsh::{
    alice_marginal, bob_marginal, chsh_exact, chsh_sampled, chsh_sampled_with,
    classical_enumeration, joint_distribution, Execution, SETTINGS,
};
use bellwigner::interpretations::{grw_simulate, GrwParams};
use bellwigner::linalg::{c, ComplexVector};
use bellwigner::states::{
    bell_wigner_state, correlate_friend, entangled_pair, photon, plus_photon, FriendMapping,
    Polarization, Space, StateVector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const TSIRELSON: f64 = 2.0 * SQRT_2;
const VALUE_TOL: f64 = 1e-9;
const ALGEBRA_TOL: f64 = 1e-12;
const AGREEMENT_TOL: f64 = 1e-12;
const PROPERTY_TOL: f64 = 1e-12;
const GRW_LINEAR_REL_TOL: f64 = 1e-6;
const GRW_EXACT_TOL: f64 = 1e-12;
const NONCOMMUTING_FLOOR: f64 = 0.5;
const SIGMA_FLOOR: f64 = 5.0;
const SIGMA_SEEDS: u64 = 100;
const SIGMA_SEEDS_REQUIRED: usize = 99;
const GRW_TRIALS: u64 = 1_000_000;
const BINOMIAL_SIGMAS: f64 = 3.0;
const RANDOM_STATES: usize = 1000;

const EXACT_BUDGET: Duration = Duration::from_secs(1);
const SAMPLE_BUDGET: Duration = Duration::from_secs(5);
const ENUMERATION_BUDGET: Duration = Duration::from_millis(1);
const GRW_SIM_BUDGET: Duration = Duration::from_secs(10);

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn cli(args: &[&str]) -> Result<(Value, Duration), String> {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_bellwigner"))
        .args(args)
        .env_remove("BELLWIGNER_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    if out.status.code() != Some(0) {
        return Err(format!(
            "{args:?} exited {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    let v = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    Ok((v, elapsed))
}

fn f(v: &Value) -> Result<f64, String> {
    v.as_f64().ok_or_else(|| format!("not a number: {v}"))
}

/// The state restricted to `{|h F_v>, |v F_h>}` on each side, where the
/// friend observable is `Z` and the Wigner observable is `X`.
fn two_qubit_correlator(i: usize, j: usize) -> f64 {
    let (cs, sn) = (FRAC_PI_8.cos() / SQRT_2, FRAC_PI_8.sin() / SQRT_2);
    let psi = [sn, cs, cs, -sn];
    let z = [[1.0, 0.0], [0.0, -1.0]];
    let x = [[0.0, 1.0], [1.0, 0.0]];
    let (a, b) = (if i == 0 { z } else { x }, if j == 0 { z } else { x });
    let mut e = 0.0;
    for r in 0..4 {
        for col in 0..4 {
            e += psi[r] * a[r >> 1][col >> 1] * b[r & 1][col & 1] * psi[col];
        }
    }
    e
}

fn tsirelson_reproduction() -> Outcome {
    let (doc, elapsed) = cli(&["chsh-exact"])?;
    let s = f(&doc["s_value"])?;
    ensure!((s - TSIRELSON).abs() <= VALUE_TOL, "S = {s}");
    for (i, j) in SETTINGS {
        let key = format!("A{i}B{j}");
        let got = f(&doc["correlators"][&key])?;
        let want = two_qubit_correlator(i, j);
        ensure!(
            (got - want).abs() <= VALUE_TOL,
            "{key} = {got}, oracle {want}"
        );
        let sign = if (i, j) == (0, 0) { -1.0 } else { 1.0 };
        ensure!(
            (got - sign * SQRT_2 / 2.0).abs() <= VALUE_TOL,
            "{key} = {got}"
        );
    }
    ensure!(elapsed < EXACT_BUDGET, "took {elapsed:?}");
    Ok(format!("S = {s}, runtime {elapsed:?}"))
}

fn sigma_of(seed: u64) -> Result<f64, String> {
    let mut stdout = Vec::new();
    let mut stderr = Vec::new();
    let seed = seed.to_string();
    let code = bellwigner_cli::run_with(
        [
            "bellwigner",
            "chsh-sample",
            "--shots",
            "1000",
            "--seed",
            &seed,
        ],
        None,
        &mut stdout,
        &mut stderr,
    );
    ensure!(code == 0, "seed {seed} exited {code}");
    let v: Value = serde_json::from_slice(&stdout).map_err(|e| e.to_string())?;
    f(&v["sigma_violation"])
}

fn statistical_violation() -> Outcome {
    let start = Instant::now();
    let (doc, _) = cli(&["chsh-sample", "--shots", "1000", "--seed", "42"])?;
    let headline = f(&doc["sigma_violation"])?;
    ensure!(headline > SIGMA_FLOOR, "seed 42: sigma {headline}");
    let mut above = 0;
    let mut lowest = f64::INFINITY;
    for seed in 0..SIGMA_SEEDS {
        let sigma = sigma_of(seed)?;
        lowest = lowest.min(sigma);
        above += usize::from(sigma > SIGMA_FLOOR);
    }
    let elapsed = start.elapsed();
    ensure!(
        above >= SIGMA_SEEDS_REQUIRED,
        "{above}/{SIGMA_SEEDS} seeds above {SIGMA_FLOOR} sigma"
    );
    ensure!(elapsed < SAMPLE_BUDGET, "took {elapsed:?}");
    Ok(format!(
        "seed 42 sigma = {headline:.2}, {above}/{SIGMA_SEEDS} seeds > {SIGMA_FLOOR} (min {lowest:.2}), runtime {elapsed:?}"
    ))
}

fn classical_bound() -> Outcome {
    let (doc, _) = cli(&["classical-bound"])?;
    ensure!(
        f(&doc["classical_max"])? == 2.0,
        "classical_max = {}",
        doc["classical_max"]
    );
    ensure!(doc["cases"] == 36, "cases = {}", doc["cases"]);
    let mut timings: Vec<Duration> = (0..11)
        .map(|_| {
            let start = Instant::now();
            let e = std::hint::black_box(classical_enumeration());
            let t = start.elapsed();
            assert_eq!(e.cases, 36);
            t
        })
        .collect();
    timings.sort();
    let median = timings[timings.len() / 2];
    ensure!(median < ENUMERATION_BUDGET, "median enumeration {median:?}");
    Ok(format!(
        "max 2 over 36 cases, median enumeration {median:?}"
    ))
}

fn algebraic_identities() -> Outcome {
    let (doc, _) = cli(&["verify-algebra"])?;
    ensure!(
        doc["all_passed"] == true,
        "all_passed = {}",
        doc["all_passed"]
    );
    let checks = doc["checks"].as_array().ok_or("no checks")?;
    let check = |name: &str| -> Result<f64, String> {
        let c = checks
            .iter()
            .find(|c| c["name"] == name)
            .ok_or(format!("missing {name}"))?;
        ensure!(c["passed"] == true, "{name} failed");
        f(&c["residual"])
    };
    for name in [
        "A0^2 = I",
        "B0^2 = I",
        "A1^2 = |hFv><hFv| + |vFh><vFh|",
        "B1^2 = |hFv><hFv| + |vFh><vFh|",
    ] {
        let r = check(name)?;
        ensure!(r <= ALGEBRA_TOL, "{name}: residual {r}");
    }
    for name in ["[A0,B0] = 0", "[A0,B1] = 0", "[A1,B0] = 0", "[A1,B1] = 0"] {
        let r = check(name)?;
        ensure!(r == 0.0, "{name}: norm {r}");
    }
    let mut intra = Vec::new();
    for name in ["[A0,A1] != 0", "[B0,B1] != 0"] {
        let r = check(name)?;
        ensure!(r > NONCOMMUTING_FLOOR, "{name}: norm {r}");
        intra.push(r);
    }
    for (label, want) in [
        ("A0", vec![-1.0, 1.0]),
        ("B0", vec![-1.0, 1.0]),
        ("A1", vec![-1.0, 0.0, 1.0]),
        ("B1", vec![-1.0, 0.0, 1.0]),
    ] {
        check(&format!("spectrum {label}"))?;
        let (obs, _) = cli(&["dump-observable", label])?;
        let mut values = obs["spectrum"]
            .as_array()
            .ok_or("no spectrum")?
            .iter()
            .map(|t| f(&t["value"]))
            .collect::<Result<Vec<_>, _>>()?;
        values.sort_by(f64::total_cmp);
        ensure!(values == want, "{label} spectrum {values:?}");
    }
    Ok(format!(
        "{} checks pass, intra-side commutator norms {intra:?}",
        checks.len()
    ))
}

fn grw_numbers() -> Outcome {
    let (atom, _) = cli(&["grw-prob", "--n", "100", "--t", "1e3", "--rate", "1e-16"])?;
    let lin = f(&atom["linear"])?;
    ensure!(
        ((lin - 1e-11) / 1e-11).abs() < GRW_LINEAR_REL_TOL,
        "atom linear {lin}"
    );
    let (inst, _) = cli(&["grw-prob", "--n", "1e25", "--t", "1e-9", "--rate", "1e-16"])?;
    let (lin_i, exact_i) = (f(&inst["linear"])?, f(&inst["exact"])?);
    let want = 1.0 - (-1.0f64).exp();
    ensure!(lin_i == 1.0, "instrument linear {lin_i}");
    ensure!(
        (exact_i - want).abs() <= GRW_EXACT_TOL,
        "instrument exact {exact_i}"
    );
    Ok(format!(
        "atom linear {lin:e}, instrument linear {lin_i}, exact {exact_i}"
    ))
}

fn grw_monte_carlo() -> Outcome {
    let trials = GRW_TRIALS.to_string();
    let mut notes = Vec::new();
    for (name, n, t) in [("atom", "100", "1e3"), ("instrument", "1e25", "1e-9")] {
        let (doc, elapsed) = cli(&[
            "grw-sim", "--trials", &trials, "--n", n, "--t", t, "--rate", "1e-16",
        ])?;
        let frac = f(&doc["collapsed_fraction"])?;
        let p = f(&doc["exact_probability"])?;
        let sigma = (p * (1.0 - p) / GRW_TRIALS as f64).sqrt();
        let dev = (frac - p).abs();
        ensure!(
            dev <= BINOMIAL_SIGMAS * sigma,
            "{name}: {frac} vs {p} (sigma {sigma})"
        );
        ensure!(elapsed < GRW_SIM_BUDGET, "{name} took {elapsed:?}");
        notes.push(format!(
            "{name} {frac} vs {p:.7} ({:.2} sigma, {elapsed:?})",
            dev / sigma.max(f64::MIN_POSITIVE)
        ));
    }
    Ok(notes.join("; "))
}

/// Born-weighted average of the CHSH value over the product kets that
/// survive once both friends' records are fixed.
fn collapsed_branch_oracle() -> Result<f64, String> {
    let psi = bell_wigner_state();
    let mut s = 0.0;
    for (idx, amp) in psi.amplitudes().entries().iter().enumerate() {
        let w = amp.norm_sqr();
        if w == 0.0 {
            continue;
        }
        let branch = StateVector::new(Space::Full, ComplexVector::basis(16, idx))
            .map_err(|e| e.to_string())?;
        s += w * chsh_exact(&branch).map_err(|e| e.to_string())?.s_value;
    }
    Ok(s)
}

fn interpretation_agreement() -> Outcome {
    let backends = ["pilot_wave", "grw", "many_worlds"];
    let s_values = |doc: &Value| -> Result<Vec<f64>, String> {
        backends
            .iter()
            .map(|b| f(&doc["backends"][b]["s_value"]))
            .collect()
    };
    let pairwise = |s: &[f64]| {
        s.iter()
            .all(|a| s.iter().all(|b| (a - b).abs() <= AGREEMENT_TOL))
    };

    let (micro, _) = cli(&["agreement", "--scale", "micro"])?;
    let sm = s_values(&micro)?;
    ensure!(pairwise(&sm), "micro {sm:?}");
    ensure!(
        sm.iter().all(|s| (s - TSIRELSON).abs() <= VALUE_TOL),
        "micro {sm:?}"
    );
    ensure!(micro["all_equal"] == true, "micro all_equal false");

    let (macro_, _) = cli(&["agreement", "--scale", "macro"])?;
    let sx = s_values(&macro_)?;
    let oracle = collapsed_branch_oracle()?;
    ensure!(
        (oracle - SQRT_2 / 2.0).abs() <= VALUE_TOL,
        "oracle {oracle}"
    );
    ensure!(pairwise(&sx), "macro {sx:?}");
    ensure!(
        sx.iter()
            .all(|s| (s - oracle).abs() <= VALUE_TOL && *s <= 2.0),
        "macro {sx:?}"
    );
    ensure!(macro_["all_equal"] == true, "macro all_equal false");
    Ok(format!(
        "micro S = {}, macro S = {} (oracle {oracle})",
        sm[0], sx[0]
    ))
}

fn random_state(rng: &mut ChaCha8Rng) -> StateVector {
    let entries = (0..16)
        .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    StateVector::normalizing(Space::Full, ComplexVector::new(entries).unwrap()).unwrap()
}

fn property_suites() -> Outcome {
    let e = |x: bellwigner::Error| x.to_string();
    let friend = correlate_friend(&plus_photon(), FriendMapping::Aligned).map_err(e)?;
    let anti = correlate_friend(&photon(Polarization::V), FriendMapping::AntiAligned).map_err(e)?;
    for s in [
        plus_photon(),
        photon(Polarization::H),
        friend,
        anti,
        entangled_pair(),
        bell_wigner_state(),
    ] {
        ensure!((s.norm() - 1.0).abs() <= PROPERTY_TOL, "norm {}", s.norm());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_s: f64 = 0.0;
    let mut worst_marginal: f64 = 0.0;
    let mut worst_table: f64 = 0.0;
    for k in 0..RANDOM_STATES {
        let psi = if k == 0 {
            bell_wigner_state()
        } else {
            random_state(&mut rng)
        };
        let exact = chsh_exact(&psi).map_err(e)?;
        worst_s = worst_s.max(exact.s_value.abs());
        for (i, j) in SETTINGS {
            let table = joint_distribution(&psi, i, j).map_err(e)?;
            let total: f64 = table.iter().map(|o| o.joint_probability).sum();
            let corr: f64 = table
                .iter()
                .map(|o| o.a_value * o.b_value * o.joint_probability)
                .sum();
            worst_table = worst_table
                .max((total - 1.0).abs())
                .max((corr - exact.correlators.get(i, j)).abs());
            for (v, p) in alice_marginal(&psi, i).map_err(e)? {
                let from_table: f64 = table
                    .iter()
                    .filter(|o| o.a_value == v)
                    .map(|o| o.joint_probability)
                    .sum();
                worst_marginal = worst_marginal.max((from_table - p).abs());
            }
            for (v, p) in bob_marginal(&psi, j).map_err(e)? {
                let from_table: f64 = table
                    .iter()
                    .filter(|o| o.b_value == v)
                    .map(|o| o.joint_probability)
                    .sum();
                worst_marginal = worst_marginal.max((from_table - p).abs());
            }
        }
    }
    ensure!(worst_s <= TSIRELSON + VALUE_TOL, "|S| = {worst_s}");
    ensure!(worst_table <= PROPERTY_TOL, "table residual {worst_table}");
    ensure!(
        worst_marginal <= PROPERTY_TOL,
        "marginal residual {worst_marginal}"
    );

    let psi = bell_wigner_state();
    for seed in [0, 42, 7_777] {
        let a = chsh_sampled(&psi, 4096, seed).map_err(e)?;
        let b = chsh_sampled(&psi, 4096, seed).map_err(e)?;
        let serial = chsh_sampled_with(&psi, 4096, seed, Execution::Serial).map_err(e)?;
        ensure!(
            a == b && a == serial,
            "sampled rerun differs for seed {seed}"
        );
        ensure!(
            a.s_value.to_bits() == serial.s_value.to_bits(),
            "S bits differ for seed {seed}"
        );
    }
    let p = GrwParams::instrument();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|x| x.to_string())?;
    let single = pool.install(|| grw_simulate(&p, 100_000, 3)).map_err(e)?;
    ensure!(
        single == grw_simulate(&p, 100_000, 3).map_err(e)?,
        "grw_simulate differs across thread counts"
    );
    Ok(format!(
        "{RANDOM_STATES} states: max |S| {worst_s:.6}, table residual {worst_table:e}, marginal residual {worst_marginal:e}"
    ))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 8] = [
        ("1 Tsirelson reproduction", tsirelson_reproduction),
        ("2 statistical violation", statistical_violation),
        ("3 classical bound", classical_bound),
        ("4 algebraic identities", algebraic_identities),
        ("5 GRW numbers", grw_numbers),
        ("6 GRW Monte Carlo", grw_monte_carlo),
        ("7 interpretation agreement", interpretation_agreement),
        ("8 property suites", property_suites),
    ];
    let mut failed = Vec::new();
    for (name, criterion) in criteria {
        match criterion() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                println!("FAIL  {name}: {why}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
