pub mod born;
pub mod config;
pub mod convexify;
pub mod error;
pub mod forward;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod postprocess;
pub mod preprocess;
pub mod scene;
pub mod sparse;

pub use error::{Error, Result};

/// Book chapters, compiled and run as doctests.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    pub mod overview {}
    #[doc = include_str!("../../../book/src/coordinates.md")]
    pub mod coordinates {}
    #[doc = include_str!("../../../book/src/delay-and-sum.md")]
    pub mod delay_and_sum {}
    #[doc = include_str!("../../../book/src/convexification.md")]
    pub mod convexification {}
    #[doc = include_str!("../../../book/src/gauss-filter.md")]
    pub mod gauss_filter {}
    #[doc = include_str!("../../../book/src/imaging.md")]
    pub mod imaging {}
    #[doc = include_str!("../../../book/src/born.md")]
    pub mod born {}
    #[doc = include_str!("../../../book/src/configuration.md")]
    pub mod configuration {}
    #[doc = include_str!("../../../book/src/acceptance.md")]
    pub mod acceptance {}
}
