pub mod container;
pub mod cs;
pub mod error;
pub mod experiment;
pub mod image;
pub mod metrics;
pub mod nn;
pub mod numeric;
pub mod optics;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/ghost-imaging.md")]
    mod ghost_imaging {}
    #[doc = include_str!("../../../book/src/compressed-sensing.md")]
    mod compressed_sensing {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
}
