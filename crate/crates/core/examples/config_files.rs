//! Round-trip a sequence through its JSON form and run an experiment config.
use cpulse::io::{sequence_from_json, sequence_to_json, ExperimentFile};
use cpulse::{compose_word, compose, ErrorParams};

fn main() -> cpulse::Result<()> {
    let seq = compose_word("G1")?;
    let json = sequence_to_json(&seq);
    print!("{json}");
    let back = sequence_from_json(&json)?;
    let (a, b) = (compose(&seq, ErrorParams::strength(0.1)?)?, compose(&back, ErrorParams::strength(0.1)?)?);
    println!("round trip |Δw| = {:.1e}", (a.w - b.w).abs());

    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/naive_narrow.json");
    let exp = ExperimentFile::read(path.as_ref())?;
    let table = exp.run()?;
    println!("\n{} rows, config hash {}", table.rows.len(), exp.hash());
    print!("{}", table.to_csv().lines().take(4).collect::<Vec<_>>().join("\n"));
    println!();
    Ok(())
}
