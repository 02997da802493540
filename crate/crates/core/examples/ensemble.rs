//! Excitation curves averaged over an inhomogeneous B1 field, with and
//! without an N2 echo filter, and nutation curves through N2 and F2 filters.
use cpulse::ensemble::{
    amplitude_fit_residual, default_durations, ensemble_signal, lean, nutation_curve, signal, B1Distribution,
    ExperimentConfig, Filter, DEFAULT_BROAD_WEIGHT, DEFAULT_QUADRATURE,
};
use cpulse::{compose_word, Angle, Pulse, PulseSequence};

fn main() -> cpulse::Result<()> {
    let naive = PulseSequence::single(Pulse::new(Angle::pi_frac(1, 2), Angle::zero())?);
    let wide = B1Distribution::two_component(DEFAULT_BROAD_WEIGHT);
    let narrow = B1Distribution::narrow();

    let grid: Vec<f64> = (-4..=4).map(|k| k as f64 / 10.0).collect();
    for (name, dist) in [("narrow", &narrow), ("two-component", &wide)] {
        let cfg = ExperimentConfig::new(naive.clone(), grid.clone(), dist.clone());
        println!("naive 90, {name:<13} lean {:+.5}", lean(&cfg)?);
    }

    let n2 = Filter::new(compose_word("N2")?);
    let cfg = ExperimentConfig::new(naive.clone(), grid.clone(), wide.clone()).with_filter(n2.clone());
    println!("\n  ε_len  N2-filtered  ε only");
    for &e in &grid {
        let v = ensemble_signal(&cfg, e)?;
        println!("  {e:+.1}  {:.6}    {:.6}", v.value, signal(&naive, e, 0.0));
    }

    let t = default_durations();
    let model = nutation_curve(&t, &narrow, None, DEFAULT_QUADRATURE)?;
    let model: Vec<f64> = model.iter().map(|v| v.value).collect();
    for (name, filter) in [("N2", n2), ("F2", Filter::new(compose_word("F2")?))] {
        let data = nutation_curve(&t, &wide, Some(&filter), DEFAULT_QUADRATURE)?;
        let data: Vec<f64> = data.iter().map(|v| v.value).collect();
        println!("nutation through {name}: 25 kHz fit residual {:.4}", amplitude_fit_residual(&data, &model));
    }
    Ok(())
}
