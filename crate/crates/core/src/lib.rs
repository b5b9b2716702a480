//! Windowed nearest neighbour (WNN) classification of greyscale digit images.
//!
//! The crate is organised around interchangeable classifiers (plain nearest
//! neighbour, WNN, distance-WNN and a hybrid of the two) registered by name in
//! a [`registry::ClassifierRegistry`], plus the data handling, augmentation,
//! window pruning and evaluation tooling needed to run them on MNIST-style
//! IDX data.

pub mod augment;
pub mod dataset;
pub mod dwnn;
pub mod error;
pub mod eval;
pub mod kernel;
pub mod prune;
pub mod registry;
pub mod synth;
pub mod training;
pub mod wnn;

pub use error::{Error, Result};
