//! Command-line front end. Angles on the command line and in files are in
//! degrees.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{invalid, Error, Result};
use crate::families::{family_sequence, nb1, pb1, phase_multiples, symmetrize, Family, SymmetrizeMode};
use crate::io::{num, sequence_to_json, write_output, ExperimentFile, Resolved, SequenceRef, Table, WnSpec};
use crate::real::DEFAULT_PRECISION_BITS;
use crate::scan::{contours, fsens, perfect_points, scan1d, scan2d, PerfectPointOptions, Range, DEFAULT_LEVELS};
use crate::search::{search_nonempty, SearchProblem, DEFAULT_SEED, DEFAULT_TOL};
use crate::series::{infidelity_series_about, leading_term, Target};
use crate::su2::Pulse;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_AMBIGUOUS: i32 = 3;
pub const EXIT_EXHAUSTED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "cpulse", version, about = "Composite pulse construction, certification and search")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a sequence as JSON and list its phases.
    Generate {
        #[command(flatten)]
        seq: SeqArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Leading term of the infidelity series.
    Certify {
        #[command(flatten)]
        seq: SeqArgs,
        /// Truncation order; by default doubled until a term is found.
        #[arg(long)]
        order: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_PRECISION_BITS)]
        bits: u32,
        /// Expansion point in ε.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        about: f64,
    },
    /// Fidelity along ε at fixed f.
    Scan1d {
        #[command(flatten)]
        seq: SeqArgs,
        /// ε must stay above -1.
        #[arg(long, default_value = "-0.99:0.99:0.01", allow_hyphen_values = true)]
        eps_range: Range,
        /// Single off-resonance value.
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        f_range: Range,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fidelity over an ε × f grid with contour lines.
    Scan2d {
        #[command(flatten)]
        seq: SeqArgs,
        #[arg(long, default_value = "-0.98:0.98:0.02", allow_hyphen_values = true)]
        eps_range: Range,
        #[arg(long, default_value = "-1:1:0.02", allow_hyphen_values = true)]
        f_range: Range,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_LEVELS)]
        contours: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Contour file; defaults to `<out>` with a `_contours` suffix.
        #[arg(long)]
        contours_out: Option<PathBuf>,
    },
    /// ε values of unit fidelity with their local orders.
    PerfectPoints {
        #[command(flatten)]
        seq: SeqArgs,
        /// Search interval and coarse step.
        #[arg(long, default_value = "-0.99:0.99:0.001", allow_hyphen_values = true)]
        eps_range: Range,
        #[arg(long, default_value_t = 24)]
        order: usize,
        #[arg(long, default_value_t = crate::scan::PERFECT_BITS)]
        bits: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quadratic off-resonance coefficient at ε = 0.
    Fsens {
        #[command(flatten)]
        seq: SeqArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Multi-start search for W_n correction phases.
    SearchWn {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 90.0)]
        angle: f64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Number of starts; defaults depend on n.
        #[arg(long)]
        starts: Option<usize>,
        #[arg(long, default_value = "center")]
        placement: String,
        /// Objective value a local minimum must reach to count as a solution.
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        /// Include wall time in the report (breaks byte-identical output).
        #[arg(long)]
        timing: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ensemble experiment from a JSON config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Sequence selection shared by the sequence commands.
#[derive(Debug, Args, Default)]
pub struct SeqArgs {
    /// `F`, `G`, `N` or `P`.
    #[arg(long)]
    pub family: Option<Family>,
    /// Iteration depth for `--family`.
    #[arg(long)]
    pub n: Option<u32>,
    /// Family word, rightmost letter innermost (`GF`, `F2G`).
    #[arg(long)]
    pub word: Option<String>,
    /// W_n correction of the given n.
    #[arg(long)]
    pub wn: Option<usize>,
    /// Target angle in degrees for `--wn`, `--named bb1` and `--named naive`.
    #[arg(long)]
    pub angle: Option<f64>,
    /// Comma-separated W_n correction phases in degrees.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub phases: Option<Vec<f64>>,
    /// Main pulse position for `--wn`: `front`, `back` or `center`.
    #[arg(long)]
    pub placement: Option<String>,
    /// One-based row of the reference phase table.
    #[arg(long)]
    pub table_row: Option<usize>,
    /// Polish W_n phases to the nearby exact solution.
    #[arg(long)]
    pub refine: bool,
    /// `bb1`, `nb1`, `pb1` or `naive`.
    #[arg(long)]
    pub named: Option<String>,
    /// Sequence JSON file.
    #[arg(long)]
    pub sequence: Option<PathBuf>,
    /// Rewrite as a symmetric sequence (`shift` or `full`).
    #[arg(long)]
    pub symmetrize: Option<SymmetrizeMode>,
    /// Comparison gate: `identity`, or a rotation angle in degrees about x.
    #[arg(long)]
    pub target: Option<String>,
}

impl SeqArgs {
    pub fn resolve(&self) -> Result<Resolved> {
        let chosen = [
            self.family.is_some(),
            self.word.is_some(),
            self.wn.is_some(),
            self.named.is_some(),
            self.sequence.is_some(),
        ]
        .iter()
        .filter(|b| **b)
        .count();
        if chosen != 1 {
            return Err(invalid("choose exactly one of --family, --word, --wn, --named, --sequence"));
        }
        let mut r = if let Some(f) = self.family {
            let n = self.n.ok_or_else(|| invalid("--family needs --n"))?;
            Resolved {
                sequence: family_sequence(f, n),
                target: Target::pi_x(),
            }
        } else if let Some(w) = &self.word {
            SequenceRef::Word(w.clone()).resolve()?
        } else if let Some(n) = self.wn {
            let angle = self.angle.ok_or_else(|| invalid("--wn needs --angle"))?;
            SequenceRef::Wn(WnSpec {
                angle_degrees: angle,
                phases_degrees: self.phases.clone(),
                n: Some(n),
                table_row: self.table_row,
                placement: self.placement.clone(),
                refine: self.refine,
            })
            .resolve()?
        } else if let Some(name) = &self.named {
            match name.to_ascii_lowercase().as_str() {
                "bb1" => SequenceRef::Bb1 {
                    angle_degrees: self.angle.unwrap_or(180.0),
                }
                .resolve()?,
                "naive" => SequenceRef::Naive {
                    angle_degrees: self.angle.unwrap_or(180.0),
                }
                .resolve()?,
                "nb1" => Resolved {
                    sequence: nb1(),
                    target: Target::pi_x(),
                },
                "pb1" => Resolved {
                    sequence: pb1(),
                    target: Target::pi_x(),
                },
                other => return Err(invalid(format!("unknown named sequence {other:?}"))),
            }
        } else {
            SequenceRef::File(self.sequence.clone().expect("counted above")).resolve()?
        };
        if let Some(mode) = self.symmetrize {
            r.sequence = symmetrize(&r.sequence, mode)?;
        }
        if let Some(t) = &self.target {
            r.target = parse_target(t)?;
        }
        Ok(r)
    }

    /// Unit for echoing phases, when the sequence comes from one family.
    fn phase_unit(&self) -> Option<(String, crate::angle::Angle)> {
        let fam = match (&self.family, &self.word) {
            (Some(f), _) => Some(*f),
            (None, Some(w)) => {
                let letters: Vec<char> = w.chars().filter(|c| c.is_ascii_alphabetic()).collect();
                let first = Family::from_letter(*letters.first()?).ok()?;
                letters.iter().all(|c| c.eq_ignore_ascii_case(&first.letter())).then_some(first)
            }
            _ => None,
        }?;
        let name = match fam {
            Family::F => "phi",
            Family::G => "gamma",
            Family::N => "nu",
            Family::P => "psi",
        };
        Some((name.to_string(), fam.unit()))
    }
}

fn parse_target(s: &str) -> Result<Target> {
    if s.eq_ignore_ascii_case("identity") {
        return Ok(Target::Identity);
    }
    let deg: f64 = s.parse().map_err(|_| invalid(format!("bad target {s:?}")))?;
    Ok(Pulse::new(crate::families::angle_from_degrees(deg), crate::angle::Angle::zero())?.into())
}

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidInput(_) | Error::Format(_) | Error::Unsupported(_) | Error::Precision(_) => EXIT_USAGE,
        Error::Ambiguous { .. } => EXIT_AMBIGUOUS,
        Error::SearchExhausted { .. } => EXIT_EXHAUSTED,
        _ => EXIT_FAILURE,
    }
}

/// Parses arguments, runs the command and returns the exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Ambiguous { .. }) {
                eprintln!("hint: rerun with a larger --bits");
            }
            exit_code(&e)
        }
    }
}

pub fn run(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Generate { seq, out } => generate(seq, out.as_deref()),
        Command::Certify { seq, order, bits, about } => certify(seq, *order, *bits, *about),
        Command::Scan1d {
            seq,
            eps_range,
            f_range,
            out,
        } => {
            if f_range.start != f_range.stop {
                return Err(invalid("scan1d takes a single f value"));
            }
            let r = seq.resolve()?;
            let pts = scan1d(&r.sequence, &r.target, eps_range, f_range.start)?;
            let mut t = Table::new(&["epsilon", "f", "fidelity", "infidelity"]);
            for p in pts {
                t.push(vec![num(p.epsilon), num(p.f), num(p.fidelity), num(p.infidelity)]);
            }
            write_output(out.as_deref(), &t.to_csv())
        }
        Command::Scan2d {
            seq,
            eps_range,
            f_range,
            contours: levels,
            out,
            contours_out,
        } => scan2d_cmd(seq, eps_range, f_range, levels, out.as_deref(), contours_out.as_deref()),
        Command::PerfectPoints {
            seq,
            eps_range,
            order,
            bits,
            out,
        } => {
            let r = seq.resolve()?;
            let opts = PerfectPointOptions {
                range: (eps_range.start, eps_range.stop),
                coarse_step: eps_range.step,
                order: *order,
                bits: *bits,
                ..Default::default()
            };
            let rep = perfect_points(&r.sequence, &r.target, &opts)?;
            let mut t = Table::new(&["epsilon", "order", "infidelity", "status"]);
            for (p, status) in rep
                .verified
                .iter()
                .map(|p| (p, "verified"))
                .chain(rep.near_perfect.iter().map(|p| (p, "near-perfect")))
            {
                let order = p.order.map_or_else(String::new, |o| o.to_string());
                t.push(vec![num(p.epsilon), order, num(p.infidelity), status.to_string()]);
            }
            write_output(out.as_deref(), &t.to_csv())
        }
        Command::Fsens { seq, out } => {
            let r = seq.resolve()?;
            let s = fsens(&r.sequence, &r.target)?;
            let text = format!(
                "coefficient {}\nsimple_coefficient {}\nratio {}\nodd_difference {:e}\n",
                s.coefficient, s.simple_coefficient, s.ratio, s.odd_difference
            );
            match out {
                Some(p) => write_output(Some(p), &(serde_json::to_string_pretty(&s).expect("plain data") + "\n")),
                None => write_output(None, &text),
            }
        }
        Command::SearchWn {
            n,
            angle,
            seed,
            starts,
            placement,
            tol,
            timing,
            out,
        } => {
            let mut p = SearchProblem::new(*n, *angle);
            p.seed = *seed;
            p.tol = *tol;
            if let Some(s) = starts {
                p.starts = *s;
            }
            p.placement = placement.clone();
            let t0 = std::time::Instant::now();
            let mut rep = search_nonempty(&p)?;
            if *timing {
                rep.wall_time_s = Some(t0.elapsed().as_secs_f64());
            }
            write_output(out.as_deref(), &(serde_json::to_string_pretty(&rep).expect("plain data") + "\n"))
        }
        Command::Simulate { config, out } => {
            let f = ExperimentFile::read(config)?;
            write_output(out.as_deref(), &f.run()?.to_csv())
        }
    }
}

fn generate(seq: &SeqArgs, out: Option<&Path>) -> Result<()> {
    let r = seq.resolve()?;
    write_output(out, &sequence_to_json(&r.sequence))?;
    let listing = match seq.phase_unit() {
        Some((name, unit)) => match phase_multiples(&r.sequence, &unit) {
            Some(m) => format!("{} pulses, phases in units of {name}: {}", r.sequence.len(), join(m.iter().map(|q| q.to_string()))),
            None => degree_listing(&r),
        },
        None => degree_listing(&r),
    };
    eprintln!("{listing}");
    Ok(())
}

fn degree_listing(r: &Resolved) -> String {
    format!(
        "{} pulses, phases in degrees: {}",
        r.sequence.len(),
        join(r.sequence.pulses().iter().map(|p| format!("{:.4}", p.phi_rad().to_degrees())))
    )
}

fn join(items: impl Iterator<Item = String>) -> String {
    items.collect::<Vec<_>>().join(" ")
}

/// Leading coefficient in closed form for the iterated families, when known.
fn closed_form(seq: &SeqArgs) -> Option<(String, f64)> {
    let (fam, n) = (seq.family?, seq.n?);
    if seq.symmetrize.is_some() || seq.target.is_some() {
        return None;
    }
    let pi = std::f64::consts::PI;
    match fam {
        Family::F if n >= 1 => {
            let q = 3f64.powi(n as i32);
            Some((
                "5^((q-1)/2) pi^(2q) 2^((1-7q)/2), q = 3^n".into(),
                5f64.powf((q - 1.0) / 2.0) * pi.powf(2.0 * q) * 2f64.powf((1.0 - 7.0 * q) / 2.0),
            ))
        }
        Family::N => Some(("(pi^2/8) (15/4)^n".into(), pi * pi / 8.0 * 3.75f64.powi(n as i32))),
        _ => None,
    }
}

fn certify(seq: &SeqArgs, order: Option<usize>, bits: u32, about: f64) -> Result<()> {
    let r = seq.resolve()?;
    let orders: Vec<usize> = match order {
        Some(o) => vec![o],
        None => vec![8, 16, 32, 64, 128],
    };
    let mut found = None;
    for (i, &o) in orders.iter().enumerate() {
        let s = infidelity_series_about(&r.sequence, &r.target, about, o, bits)?;
        match leading_term(&s, s.zero_tol()) {
            Ok(lt) => {
                found = Some((lt, o));
                break;
            }
            Err(Error::PerfectToOrder { order }) if i + 1 == orders.len() => {
                println!("sequence {} ({} pulses)", r.sequence.label, r.sequence.len());
                println!("no term above tolerance through order {order}; raise --order");
                return Ok(());
            }
            Err(Error::PerfectToOrder { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    let (lt, used) = found.expect("loop returns otherwise");
    println!("sequence {} ({} pulses)", r.sequence.label, r.sequence.len());
    println!("expansion_point {about}");
    println!("truncation_order {used}");
    println!("bits {bits}");
    println!("order {}", lt.order);
    println!("coefficient {}", lt.coefficient.to_decimal(20));
    println!("numerical_value {:e}", lt.numerical_value);
    if about == 0.0 {
        if let Some((form, value)) = closed_form(seq) {
            let rel = (lt.numerical_value - value).abs() / value.abs();
            println!("closed_form {form} = {value:e} (relative difference {rel:e})");
        }
    }
    Ok(())
}

fn contour_path(out: Option<&Path>, explicit: Option<&Path>) -> Option<PathBuf> {
    if let Some(p) = explicit {
        return Some(p.to_path_buf());
    }
    let out = out.filter(|p| *p != Path::new("-"))?;
    let stem = out.file_stem()?.to_string_lossy();
    Some(out.with_file_name(format!("{stem}_contours.csv")))
}

fn scan2d_cmd(seq: &SeqArgs, eps: &Range, f: &Range, levels: &[f64], out: Option<&Path>, contours_out: Option<&Path>) -> Result<()> {
    let r = seq.resolve()?;
    let g = scan2d(&r.sequence, &r.target, eps, f)?;
    let mut t = Table::new(&["epsilon", "f", "fidelity"]);
    for (j, ff) in g.f.iter().enumerate() {
        for (i, e) in g.eps.iter().enumerate() {
            t.push(vec![num(*e), num(*ff), num(g.fidelity[j][i])]);
        }
    }
    write_output(out, &t.to_csv())?;
    let mut c = Table::new(&["level", "contour", "point", "epsilon", "f"]);
    let mut id = 0usize;
    for &level in levels {
        for line in contours(&g, level) {
            for (k, (e, ff)) in line.points.iter().enumerate() {
                c.push(vec![num(level), id.to_string(), k.to_string(), num(*e), num(*ff)]);
            }
            id += 1;
        }
    }
    match contour_path(out, contours_out) {
        Some(p) => write_output(Some(&p), &c.to_csv()),
        None => {
            eprintln!("{id} contour lines; pass --out or --contours-out to save them");
            Ok(())
        }
    }
}
