//! Stage three: Gauss-object filtering of each antenna's potential, artifact
//! removal and assembly of the slant-range image.

mod filter;
mod image;
mod peaks;

pub use filter::{dielectric_from_r, gauss_filter, Amplitude, gauss_fit, FilterParams, GaussFilter, GaussFit};
pub use image::{assemble_image, remove_shape_artifacts, remove_value_artifacts, Region, SlantRangeImage};
pub use peaks::{find_peaks, maxk, PeakSet};

/// Height above the background at which a cell counts as target.
pub const EPS_FLOOR: f64 = 0.05;
