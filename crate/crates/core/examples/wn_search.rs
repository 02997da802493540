//! Multi-start search for W_n correction phases around a 90° pulse, then
//! certification of each class found.
use std::time::Instant;

use cpulse::search::{search, SearchProblem};

fn main() -> cpulse::Result<()> {
    let n: usize = std::env::args().nth(1).map_or(Ok(2), |a| a.parse()).unwrap_or(2);
    let mut problem = SearchProblem::new(n, 90.0);
    // a few hundred starts are plenty to see every class for n ≤ 3
    problem.starts = problem.starts.min(400);

    let t = Instant::now();
    let report = search(&problem)?;
    println!("W{n} at 90°: {} starts in {:.2?}", problem.starts, t.elapsed());
    for s in &report.solutions {
        let ph: Vec<String> = s.phases_degrees.iter().map(|p| format!("{p:.1}")).collect();
        println!(
            "  [{}]  objective {:.1e}  order {:?}  coefficient {:.6}  hits {}",
            ph.join(", "),
            s.objective_value,
            s.certified_order,
            s.residual_coefficient.unwrap_or(f64::NAN),
            s.hits
        );
    }
    if !report.demoted.is_empty() {
        println!("  {} minima failed certification", report.demoted.len());
    }
    Ok(())
}
