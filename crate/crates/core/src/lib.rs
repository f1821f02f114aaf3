//! Seeded extractors built from a one-bit code extractor and a weak design,
//! with a Toeplitz second stage and exact micro-scale analysis of the error.

pub mod bitfield;
pub mod code_extractor;
pub mod entropy;
pub mod error;
pub mod harness;
pub mod params;
pub mod trevisan;
pub mod universal_hash;
pub mod weak_design;

pub use bitfield::BitString;
pub use code_extractor::{code_params, CodeSpec};
pub use error::{Error, Result};
pub use params::{ExtractorParams, Preset};
pub use trevisan::{extract, TrevisanInstance};
pub use weak_design::WeakDesign;
