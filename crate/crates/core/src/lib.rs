//! Gaussian-kernel affinity matrices and their normalizations.

pub mod datagen;
pub mod error;
pub mod experiments;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod normalize;
pub mod spectral;

pub use error::{Error, Result};

// Runs the guide's snippets as doctests so the book cannot drift from the API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    mod kernels {}
    #[doc = include_str!("../../../book/src/normalizations.md")]
    mod normalizations {}
    #[doc = include_str!("../../../book/src/sinkhorn.md")]
    mod sinkhorn {}
    #[doc = include_str!("../../../book/src/spectral.md")]
    mod spectral {}
    #[doc = include_str!("../../../book/src/noise.md")]
    mod noise {}
    #[doc = include_str!("../../../book/src/scrna.md")]
    mod scrna {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
