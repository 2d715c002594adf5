//! Implicit inverse force identification on strongly coupled reduced
//! vibroacoustic models.
//!
//! The crate is `no_std` and needs only `alloc`. Dense linear algebra is
//! provided by `nalgebra`.

#![no_std]
extern crate alloc;

pub mod akf;
pub mod error;
pub mod excitation;
pub mod identify;
pub mod linalg;
pub mod metrics;
pub mod newmark;
pub mod rom;
pub mod system;
pub mod toy;

pub use error::{Error, Result};
pub use identify::{Identifier, IdentifierConfig};
pub use linalg::{Mat, Vector};
pub use newmark::{NewmarkParams, State};
pub use rom::{reduce, DampingSpec, ReducedModel, RomSpec};
pub use system::{CoupledSystem, SelectionConfig};
pub use toy::{generate_toy, ToyModelSpec};
