//! Construction, analysis and simulation of power-imbalanced low-density
//! signatures (LDS) built from rings of Eisenstein integers.
//!
//! * [`eisenstein`]: hexagonal-lattice points and rings of equal magnitude
//! * [`graph`]: resource/user factor graphs
//! * [`codebook`]: signature matrices, constellations, sparse codebooks
//! * [`io`]: JSON file formats
//! * [`metrics`]: MPDS, diversity, kissing number, PEP and ABER bounds
//! * [`search`]: randomized ring-assignment search maximizing MPDS
//! * [`detector`]: exhaustive MAP and message-passing detection
//! * [`sim`]: Monte Carlo BER over AWGN and Rayleigh channels
//!
//! With the default `parallel` feature the exhaustive scans, the search and
//! the Monte Carlo loop run on rayon. Results are identical with or without
//! it and for any thread count.

pub mod codebook;
pub mod detector;
pub mod eisenstein;
pub mod error;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod par;
pub mod search;
pub mod sim;

pub use codebook::{expand, Codebook, CodebookSet, Constellation, LdsMatrix};
pub use eisenstein::{EisensteinInt, Ring};
pub use error::{LdsError, Result};
pub use graph::FactorGraph;
pub use metrics::{MetricsReport, SuperimposedSet, Tolerances};
