//! Quadratic off-resonance sensitivity at zero pulse-length error, relative
//! to a simple π pulse.
use cpulse::families::{bb1, symmetrize};
use cpulse::scan::fsens;
use cpulse::{compose_word, family_sequence, Angle, Family, SymmetrizeMode, Target};

fn main() -> cpulse::Result<()> {
    let target = Target::pi_x();
    let mut seqs = vec![bb1(&Angle::pi())?];
    for n in 0..=2 {
        seqs.push(family_sequence(Family::F, n));
        seqs.push(family_sequence(Family::G, n));
    }
    seqs.push(compose_word("FG")?);
    seqs.push(symmetrize(&family_sequence(Family::F, 1), SymmetrizeMode::Full)?);

    println!("{:<8} {:>12} {:>10} {:>10}", "sequence", "k (I≈k f²)", "ratio", "odd diff");
    for seq in &seqs {
        let s = fsens(seq, &target)?;
        println!(
            "{:<8} {:>12.6} {:>10.4} {:>10.1e}",
            seq.label, s.coefficient, s.ratio, s.odd_difference
        );
    }
    Ok(())
}
