//! Mask and probability-grid types, geometry primitives and Netpbm IO.

mod filter;
mod geometry;
mod grid;
pub mod netpbm;

pub use filter::{gaussian_blur, gaussian_kernel, gaussian_smooth, threshold};
pub use geometry::{boundary, distance_transform, iou, squared_distance_transform};
pub use grid::{BinaryMask, Grid, PixelFeatures, ProbMap, RealGrid, WeightMap};
pub use netpbm::{load_mask, load_probmap, save_mask, save_probmap};
