//! Published values this implementation does not reproduce. Each test asserts
//! the published claim as stated and is ignored by default; run with
//! `cargo test --test known_failures -- --ignored` to see the measured values.

use std::f64::consts::PI;

use cpulse::ensemble::{ensemble_signal, signal, B1Distribution, ExperimentConfig, Filter, DEFAULT_BROAD_WEIGHT};
use cpulse::families::pb1;
use cpulse::io::{SequenceRef, WnSpec};
use cpulse::search::{class_distance, search, SearchProblem};
use cpulse::series::{infidelity_series_about, leading_term};
use cpulse::tables;
use cpulse::{compose_word, Target};

#[test]
#[ignore = "known failure: the (1+ε)^4 term vanishes; the leading term is (1+ε)^6 with coefficient 63π^6/1024"]
fn pb1_against_identity_is_fourth_order_about_minus_one() {
    let s = infidelity_series_about(&pb1(), &Target::Identity, -1.0, 16, 256).unwrap();
    let lt = leading_term(&s, s.zero_tol()).unwrap();
    let want = 63.0 * PI.powi(4) / 512.0;
    assert_eq!(lt.order, 4, "coefficient {}", lt.numerical_value);
    assert!((lt.numerical_value - want).abs() / want < 1e-6);
}

#[test]
#[ignore = "known failure: the two 90° W2 classes certify with coefficients 3.8435 and 3.5410"]
fn w2_classes_share_the_tenth_order_coefficient_at_90() {
    let r = search(&SearchProblem::new(2, 90.0)).unwrap();
    let k: Vec<f64> = r.solutions.iter().filter_map(|s| s.residual_coefficient).collect();
    assert_eq!(k.len(), 2);
    assert!((k[0] - k[1]).abs() / k[1] < 1e-6, "{k:?}");
}

fn w3_rows_recovered(angle: f64) {
    let mut p = SearchProblem::new(3, angle);
    p.starts = 1000;
    let r = search(&p).unwrap();
    for row in tables::rows(3, angle) {
        let d = r
            .solutions
            .iter()
            .map(|s| class_distance(&s.phases_degrees, row.phases_degrees))
            .fold(f64::INFINITY, f64::min);
        assert!(d <= 0.5, "{:?} is {d:.2}° from the nearest class", row.phases_degrees);
    }
}

#[test]
#[ignore = "known failure: the listed W3 phases are 2-7° from the nearest exact fourteenth-order solutions"]
fn w3_table_phases_recovered_at_90() {
    w3_rows_recovered(90.0);
}

#[test]
#[ignore = "known failure: the listed W3 phases are about 4° from the nearest exact fourteenth-order solutions"]
fn w3_table_phases_recovered_at_180() {
    w3_rows_recovered(180.0);
}

#[test]
#[ignore = "known failure: the N2 passband is narrow but finite; deviations reach 1e-2 to 3e-2"]
fn n2_filtered_ensembles_match_eps_only_curves() {
    let wide = B1Distribution::two_component(DEFAULT_BROAD_WEIGHT);
    let n2 = Filter::new(compose_word("N2").unwrap());
    let grid: Vec<f64> = (-18..=18).map(|k| k as f64 / 20.0).collect();
    for n in 1..=3 {
        let seq = SequenceRef::Wn(WnSpec {
            angle_degrees: 90.0,
            phases_degrees: None,
            n: Some(n),
            table_row: Some(1),
            placement: None,
            refine: false,
        })
        .resolve()
        .unwrap()
        .sequence;
        let cfg = ExperimentConfig::new(seq.clone(), grid.clone(), wide.clone()).with_filter(n2.clone());
        for &e in &grid {
            let d = (ensemble_signal(&cfg, e).unwrap().value - signal(&seq, e, 0.0)).abs();
            assert!(d <= 1e-3, "W{n} at {e}: {d:.2e}");
        }
    }
}
