//! Pixel kernels for fundus photo standardization and vessel segmentation scoring.
//!
//! Everything in this crate is a pure function over owned pixel grids and only
//! needs `alloc`. File formats, dataset layouts and the command line live in the
//! `fundus-forge` crate.
//!
//! The pipeline is:
//!
//! 1. [`locator::locate_retina`] finds the bounding box of the retina disc.
//! 2. [`standardizer::standardize`] crops/pads that box to a square, converts to
//!    grayscale, applies CLAHE and resizes to the canonical resolution.
//! 3. [`augment`] draws reproducible rotation/flip/brightness/contrast parameters.
//! 4. [`metrics`] scores probability maps against labels (loss, Dice,
//!    sensitivity, specificity, AUC) and aggregates fold scores into
//!    `mean (ci95)` cells.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod augment;
pub mod folds;
pub mod locator;
pub mod metrics;
pub mod raster;
pub mod rng;
pub mod standardizer;

pub use locator::{locate_retina, BoundingBox, LocateError};
pub use raster::{BinaryMask, GrayImage, Grid, ProbabilityMap, RasterError, RasterImage};
pub use standardizer::{standardize, ClaheParams, StandardizeParams, StandardizedImage};
