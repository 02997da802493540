//! Single pulses and short sequences as rotors, with pulse-length and
//! off-resonance errors.
use cpulse::{compose, fidelity, ideal_target, rotor_from_pulse, Angle, ErrorParams, Pulse, PulseSequence};

fn main() -> cpulse::Result<()> {
    let x90 = Pulse::new(Angle::pi_frac(1, 2), Angle::zero())?;
    let target = ideal_target(x90.theta_rad(), x90.phi_rad());

    for eps in [0.0, 0.05, -0.1] {
        let v = rotor_from_pulse(&x90, ErrorParams::new(eps, 0.0)?)?;
        println!("90_0 eps={eps:+.2}  rotor={v:?}  F={:.7}", fidelity(&v, &target));
    }

    let v = rotor_from_pulse(&x90, ErrorParams::new(0.0, 0.1)?)?;
    println!("90_0 f=0.10       F={:.7}", fidelity(&v, &target));

    // 180_0 180_120 180_0 is no longer a pi_x pulse, but compose() doesn't care
    let seq = PulseSequence::new(
        vec![
            Pulse::pi(Angle::zero()),
            Pulse::pi(Angle::pi_frac(2, 3)),
            Pulse::pi(Angle::zero()),
        ],
        "three",
    )?;
    let v = compose(&seq, ErrorParams::ideal())?;
    println!("{}: {v:?}", seq.label);
    Ok(())
}
