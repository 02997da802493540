//! Property checks shared by the property suite and the acceptance run.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;

use cpulse::series::{infidelity_series, infidelity_series_f64};
use cpulse::{
    compose, compose_word, fidelity, infidelity, rotor_from_pulse, Angle, ErrorParams, Placement, Pulse, PulseSequence,
    Rotor, Target,
};
use cpulse::families::wn_assemble;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub const CASES: u32 = 1000;

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_cpulse")
}

fn ensure(ok: bool, msg: String) -> Result<(), TestCaseError> {
    if ok {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg))
    }
}

/// `[h, 0, -reverse(h)]` as π pulses.
pub fn antisymmetric(half: &[f64]) -> PulseSequence {
    let phases: Vec<Angle> = half
        .iter()
        .map(|&p| Angle::radians(p))
        .chain(std::iter::once(Angle::zero()))
        .chain(half.iter().rev().map(|&p| Angle::radians(-p)))
        .collect();
    PulseSequence::from_pi_phases(&phases, "anti").unwrap()
}

pub fn half_phases() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..2.0 * PI, 0..12)
}

pub fn antisymmetric_closure(half: &[f64]) -> Result<(), TestCaseError> {
    let v = compose(&antisymmetric(half), ErrorParams::ideal()).unwrap();
    let fid = fidelity(&v, &Target::pi_x().rotor());
    ensure((fid - 1.0).abs() < 1e-12, format!("fidelity {fid} for {half:?}"))
}

/// A θ_φ pulse with length error ε next to an exact π_0, swapped with the
/// phase negated.
pub fn pi_commutation(theta: f64, phi: f64, eps: f64) -> Result<(), TestCaseError> {
    let t = theta * (1.0 + eps);
    let pi0 = Pulse::pi(Angle::zero());
    let a = PulseSequence::new(vec![pi0.clone(), Pulse::from_radians(t, phi).unwrap()], "a").unwrap();
    let b = PulseSequence::new(vec![Pulse::from_radians(t, -phi).unwrap(), pi0], "b").unwrap();
    let (ra, rb) = (compose(&a, ErrorParams::ideal()).unwrap(), compose(&b, ErrorParams::ideal()).unwrap());
    let d = ra.dot(&rb).abs();
    ensure((d - 1.0).abs() < 1e-12, format!("|<a,b>| = {d}"))
}

pub fn pulse_list() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.01..2.0 * PI, 0.0..2.0 * PI), 1..=200)
}

/// Raw product norm stays within 1e-9 of one; `compose` within 1e-12.
pub fn norm_drift(pulses: &[(f64, f64)], eps: f64, f: f64) -> Result<(), TestCaseError> {
    let e = ErrorParams::new(eps, f).unwrap();
    let mut acc = Rotor::IDENTITY;
    let mut worst = 0f64;
    for &(t, p) in pulses {
        acc = rotor_from_pulse(&Pulse::from_radians(t, p).unwrap(), e).unwrap() * acc;
        worst = worst.max((acc.norm_sqr().sqrt() - 1.0).abs());
    }
    ensure(worst < 1e-9, format!("raw drift {worst}"))?;
    let seq = PulseSequence::new(
        pulses.iter().map(|&(t, p)| Pulse::from_radians(t, p).unwrap()).collect(),
        "random",
    )
    .unwrap();
    let n = compose(&seq, e).unwrap().norm_sqr().sqrt();
    ensure((n - 1.0).abs() < 1e-12, format!("composed norm {n}"))
}

pub const WORDS: [&str; 12] = ["F0", "F1", "F2", "G1", "G2", "N1", "N2", "P1", "GF", "FG", "NG", "B1"];

pub fn word_sequence(w: &str) -> PulseSequence {
    if w == "B1" {
        cpulse::families::bb1(&Angle::pi()).unwrap()
    } else {
        compose_word(w).unwrap()
    }
}

/// Truncated double-precision series against direct evaluation. The
/// remainder bound `|ε|^(N+1)·G` uses a growth factor `G = 10^4`, which
/// covers every word above at `N = 40` with a wide margin.
pub fn series_vs_direct(word: &str, eps: f64) -> Result<(), TestCaseError> {
    let seq = word_sequence(word);
    let order = 40;
    let s = infidelity_series_f64(&seq, &Target::pi_x(), 0.0, order).unwrap();
    let v = compose(&seq, ErrorParams::strength(eps).unwrap()).unwrap();
    let direct = infidelity(&v, &Target::pi_x().rotor());
    let bound = 1e-13 + 1e4 * eps.abs().powi(order as i32 + 1);
    let got = s.eval(eps);
    ensure((got - direct).abs() < bound, format!("{word} at {eps}: series {got} direct {direct}"))
}

pub fn wn_phases() -> impl Strategy<Value = (f64, Vec<f64>)> {
    (0.05..2.0 * PI, 1usize..=3).prop_flat_map(|(theta, n)| (Just(theta), prop::collection::vec(0.0..2.0 * PI, 2 * n)))
}

/// Front, back and center placement give the same ε series at f = 0.
pub fn placement_equivalence(theta: f64, phases: &[f64]) -> Result<(), TestCaseError> {
    let th = Angle::radians(theta);
    let ph: Vec<Angle> = phases.iter().map(|&p| Angle::radians(p)).collect();
    let target: Target = Pulse::new(th.clone(), Angle::zero()).unwrap().into();
    let order = 2 * phases.len() + 2;
    let series = |pl| {
        let seq = wn_assemble(&th, &ph, pl).unwrap();
        infidelity_series(&seq, &target, order, 128).unwrap()
    };
    let c = series(Placement::Center);
    for pl in [Placement::Front, Placement::Back] {
        let o = series(pl);
        let tol = c.zero_tol().max(o.zero_tol());
        for (k, (a, b)) in c.coeffs_f64().iter().zip(o.coeffs_f64()).enumerate() {
            ensure((a - b).abs() <= tol, format!("{pl:?} c{k}: {a} vs {b}"))?;
        }
    }
    Ok(())
}

/// One randomly parameterized CLI invocation.
#[derive(Clone, Debug)]
pub enum CliCase {
    Generate(String),
    Certify(String, usize),
    Scan1d(String, f64),
    Scan2d(String, f64),
    Fsens(String),
    Search(u64, usize),
    Simulate(f64, usize),
    PerfectPoints(String),
}

pub fn cli_case() -> impl Strategy<Value = CliCase> {
    let word = prop::sample::select(vec!["F1", "G1", "N1", "P1", "F2", "GF", "N2"]).prop_map(String::from);
    prop_oneof![
        word.clone().prop_map(CliCase::Generate),
        (word.clone(), 8usize..=24).prop_map(|(w, o)| CliCase::Certify(w, o)),
        (word.clone(), 0.0..0.3).prop_map(|(w, f)| CliCase::Scan1d(w, f)),
        (word.clone(), 0.05..0.2).prop_map(|(w, s)| CliCase::Scan2d(w, s)),
        word.clone().prop_map(CliCase::Fsens),
        (any::<u64>(), 1usize..=4).prop_map(|(s, k)| CliCase::Search(s, k)),
        (0.1..0.5, 64usize..=96).prop_map(|(w, q)| CliCase::Simulate(w, q)),
        prop::sample::select(vec!["G1", "F1"]).prop_map(|w| CliCase::PerfectPoints(w.into())),
    ]
}

fn round(x: f64) -> String {
    format!("{:.3}", x)
}

/// Runs the case and returns stdout, stderr, the status code and every
/// written file, in order.
pub fn run_cli(case: &CliCase, dir: &Path) -> (Vec<u8>, Vec<u8>, i32, Vec<Vec<u8>>) {
    let out = dir.join("out.dat");
    let out_s = out.to_string_lossy().to_string();
    let mut files = vec![out.clone()];
    let args: Vec<String> = match case {
        CliCase::Generate(w) => vec!["generate".into(), "--word".into(), w.clone(), "--out".into(), out_s],
        CliCase::Certify(w, o) => {
            files.clear();
            vec!["certify".into(), "--word".into(), w.clone(), "--order".into(), o.to_string(), "--bits".into(), "128".into()]
        }
        CliCase::Scan1d(w, f) => vec![
            "scan1d".into(),
            "--word".into(),
            w.clone(),
            "--eps-range".into(),
            "-0.5:0.5:0.05".into(),
            "--f-range".into(),
            round(*f),
            "--out".into(),
            out_s,
        ],
        CliCase::Scan2d(w, s) => {
            let c = dir.join("contours.csv");
            files.push(c.clone());
            vec![
                "scan2d".into(),
                "--word".into(),
                w.clone(),
                "--eps-range".into(),
                format!("-0.6:0.6:{}", round(*s)),
                "--f-range".into(),
                format!("-0.6:0.6:{}", round(*s)),
                "--out".into(),
                out_s,
                "--contours-out".into(),
                c.to_string_lossy().to_string(),
            ]
        }
        CliCase::Fsens(w) => vec!["fsens".into(), "--word".into(), w.clone(), "--out".into(), out_s],
        CliCase::Search(seed, starts) => vec![
            "search-wn".into(),
            "--n".into(),
            "1".into(),
            "--seed".into(),
            seed.to_string(),
            "--starts".into(),
            starts.to_string(),
            "--out".into(),
            out_s,
        ],
        CliCase::Simulate(w, q) => {
            let cfg = dir.join("config.json");
            let text = format!(
                r#"{{"sequence": {{"word": "N1"}}, "eps_len": [-0.4, 0.0, 0.4], "quadrature": {q},
                "distribution": {{"components": [{{"weight": 1, "center_khz": 25, "width_khz": 2.5}},
                {{"weight": {}, "center_khz": 20, "width_khz": 10}}]}}}}"#,
                round(*w)
            );
            std::fs::write(&cfg, text).unwrap();
            vec!["simulate".into(), "--config".into(), cfg.to_string_lossy().to_string(), "--out".into(), out_s]
        }
        CliCase::PerfectPoints(w) => vec![
            "perfect-points".into(),
            "--word".into(),
            w.clone(),
            "--eps-range".into(),
            "-0.6:0.6:0.01".into(),
            "--order".into(),
            "8".into(),
            "--out".into(),
            out_s,
        ],
    };
    let o = Command::new(bin()).args(&args).output().unwrap();
    let contents = files.iter().map(|f| std::fs::read(f).unwrap_or_default()).collect();
    (o.stdout, o.stderr, o.status.code().unwrap_or(-1), contents)
}

/// Two runs of the same case are byte-identical and succeed.
pub fn cli_determinism(case: &CliCase) -> Result<(), TestCaseError> {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run_cli(case, a.path());
    let second = run_cli(case, b.path());
    ensure(first.2 == 0, format!("{case:?} exited {}: {}", first.2, String::from_utf8_lossy(&first.1)))?;
    // stderr may name the temp paths, so only the data streams are compared
    ensure(first.0 == second.0, format!("{case:?}: stdout differs"))?;
    ensure(first.3 == second.3, format!("{case:?}: output files differ"))
}
