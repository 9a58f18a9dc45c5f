//! Quantal measure theory on finite sample spaces.
//!
//! Decoherence functionals and the positivity hierarchy ([`measure`]), the
//! EPRB/CHSH scenario on the 16-atom joint space ([`epr`]), the Hilbert space
//! of a strongly positive functional ([`gns`]), quantum-mechanical builders
//! ([`quantum`]), screening off ([`screening`]), the weak-positivity linear
//! program ([`lp`]) and the JSON formats read and written by the CLI ([`io`]).

pub mod epr;
pub mod error;
pub mod gns;
pub mod io;
pub mod linalg;
pub mod lp;
pub mod measure;
pub mod quantum;
pub mod screening;
mod simplex;
pub mod subsets;

pub use error::{QmtError, Result};
pub use linalg::ComplexMatrix;
pub use measure::{
    check_strong_positivity, check_weak_positivity, conditional_mu, df_pair, eigensignature,
    interference, measure_level, mu, ClassicalMeasure, DecoherenceFunctional, Event, Measure,
    PositivityReport, SampleSpace, Signature,
};
pub use num_complex::Complex64;
