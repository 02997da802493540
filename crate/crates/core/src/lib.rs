pub mod angle;
pub mod cli;
pub mod ensemble;
pub mod error;
pub mod families;
pub mod io;
pub mod lsq;
pub mod real;
pub mod scan;
pub mod search;
pub mod series;
pub mod su2;
pub mod tables;

pub use angle::Angle;
pub use error::{Error, Result};
pub use families::{compose_word, family_sequence, Family, Placement, SymmetrizeMode};
pub use real::{Big, Real};
pub use series::{infidelity_series, infidelity_series_about, leading_term, EpsSeries, LeadingTerm, Target};
pub use su2::{compose, fidelity, ideal_target, infidelity, rotor_from_pulse, ErrorParams, Pulse, PulseSequence, Rotor};
