//! Pulse-length errors at which a sequence is exact, with the local order of
//! the infidelity at each.
use cpulse::scan::{perfect_points, PerfectPointOptions};
use cpulse::{compose_word, Target};

fn main() -> cpulse::Result<()> {
    let opts = PerfectPointOptions::default();
    for word in ["G1", "G2", "GF", "FG"] {
        let seq = compose_word(word)?;
        let report = perfect_points(&seq, &Target::pi_x(), &opts)?;
        println!("{word}:");
        for p in &report.verified {
            println!("  ε = {:+.9}  order {:?}  I = {:.1e}", p.epsilon, p.order, p.infidelity);
        }
        for p in &report.near_perfect {
            println!("  near ε = {:+.9}  I = {:.1e}", p.epsilon, p.infidelity);
        }
    }
    Ok(())
}
