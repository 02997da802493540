//! Build the F, G, N and P families, named sequences and combined words, and
//! print their phases in units of each family's phase constant.
use cpulse::families::{bb1, nb1, pb1, phase_multiples, symmetrize};
use cpulse::{compose_word, family_sequence, Angle, Family, SymmetrizeMode};

fn main() -> cpulse::Result<()> {
    for fam in [Family::F, Family::G, Family::N, Family::P] {
        for n in 0..=2 {
            let s = family_sequence(fam, n);
            let units = phase_multiples(&s, &fam.unit())
                .map(|m| m.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(" "))
                .unwrap_or_default();
            println!("{:<3} {:>3} pulses  [{}]", s.label, s.len(), if s.len() <= 9 { units } else { "...".into() });
        }
    }

    for w in ["GF", "FG", "FGF", "FFG"] {
        println!("{w:<3} {:>3} pulses", compose_word(w)?.len());
    }

    let b = bb1(&Angle::pi())?;
    let deg: Vec<String> = b.pulses().iter().map(|p| format!("{:.3}", p.phi().to_degrees())).collect();
    println!("BB1(180) phases: {}", deg.join(", "));
    println!("NB1 {} pulses, PB1 {} pulses", nb1().len(), pb1().len());

    let f1 = family_sequence(Family::F, 1);
    for mode in [SymmetrizeMode::Shift, SymmetrizeMode::Full] {
        let s = symmetrize(&f1, mode)?;
        let deg: Vec<String> = s
            .pulses()
            .iter()
            .map(|p| format!("{:.0}_{:.2}", p.theta().to_degrees(), p.phi().to_degrees()))
            .collect();
        println!("{mode:?}: {}", deg.join(" "));
    }
    Ok(())
}
