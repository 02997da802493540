//! Fidelity over pulse-length and off-resonance error for a simple pulse and
//! BB1, with the area inside the 0.999 contour as a crude robustness score.
use cpulse::families::bb1;
use cpulse::scan::{contours, scan1d, scan2d, Range};
use cpulse::{Angle, Pulse, PulseSequence, Target};

fn main() -> cpulse::Result<()> {
    let target = Target::pi_x();
    let seqs = [PulseSequence::single(Pulse::pi(Angle::zero())), bb1(&Angle::pi())?];
    let eps = Range::new(-0.5, 0.5, 0.01)?;
    let f = Range::new(-0.5, 0.5, 0.01)?;

    for seq in &seqs {
        let line = scan1d(seq, &target, &Range::new(-0.3, 0.3, 0.1)?, 0.0)?;
        let cells: Vec<String> = line.iter().map(|p| format!("{:.5}", p.fidelity)).collect();
        println!("{:<4} F(ε, 0) = {}", seq.label, cells.join(" "));

        let grid = scan2d(seq, &target, &eps, &f)?;
        let inside = grid.fidelity.iter().flatten().filter(|&&v| v >= 0.999).count();
        let lines = contours(&grid, 0.999);
        let vertices: usize = lines.iter().map(|c| c.points.len()).sum();
        println!(
            "     {inside} of {} grid points above 0.999; {} contour lines, {vertices} vertices",
            grid.eps.len() * grid.f.len(),
            lines.len()
        );
    }
    Ok(())
}
