//! Local proper scoring rules for unnormalized statistical models on
//! discrete sample spaces.
//!
//! Everything here runs without `std`; file formats, threads and the
//! command line live in the `localscore` crate.

#![no_std]

extern crate alloc;

pub mod blocks;
pub mod density;
pub mod error;
pub mod estimation;
pub mod graph;
pub mod locality;
pub mod math;
pub mod oracle;
pub mod models;
pub mod potential;
pub mod sampling;
pub mod score;
pub mod space;

pub use blocks::BlockSystem;
pub use density::{FnDensity, LogDensity, Probability, UnnormalizedVector};
pub use error::{Error, Result};
pub use graph::{NeighborhoodGraph, UndirectedGraph};
pub use locality::Locality;
pub use models::{BoltzmannModel, ConditionalModel, TabularModel, UnnormalizedModel};
pub use potential::{ActiveSet, PotentialFamily, PotentialKind};
pub use score::{ScoreSpec, ScoringRule};
pub use space::SampleSpace;
