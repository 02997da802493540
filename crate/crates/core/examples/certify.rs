//! Certified leading infidelity terms in ε at high precision, with the
//! closed form for the F family alongside.
use std::f64::consts::PI;

use cpulse::families::pb1;
use cpulse::series::{infidelity_series_about, leading_term};
use cpulse::{family_sequence, Family, Target};

const BITS: u32 = 512;

fn main() -> cpulse::Result<()> {
    let target = Target::pi_x();
    for n in 0..=3 {
        let seq = family_sequence(Family::F, n);
        let q = 3f64.powi(n as i32);
        let order = 2 * q as usize + 2;
        let s = cpulse::infidelity_series(&seq, &target, order, BITS)?;
        let lt = leading_term(&s, s.zero_tol())?;
        let closed = 5f64.powf((q - 1.0) / 2.0) * PI.powf(2.0 * q) * 2f64.powf((1.0 - 7.0 * q) / 2.0);
        println!(
            "F{n}: order {:>2}  coefficient {}  closed form {closed:.6e}",
            lt.order,
            lt.coefficient.to_decimal(16)
        );
    }

    // PB1 against the identity, expanded in (1+ε) about the zero-length pulse
    let s = infidelity_series_about(&pb1(), &Target::Identity, -1.0, 12, 256)?;
    let lt = leading_term(&s, s.zero_tol())?;
    println!("PB1 vs identity about -1: order {} coefficient {:.10}", lt.order, lt.numerical_value);
    Ok(())
}
