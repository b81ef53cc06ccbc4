//! Seeded frequency-domain augmentation for single-source domain
//! generalization in segmentation.
//!
//! Each training view is built from one source image by applying two
//! independently drawn channel-wise Butterworth high-pass filters and blending
//! the two filtered variants under a mask. A Gaussian structure-saliency map
//! of the original image serves as a self-supervised reconstruction target,
//! and [`losses`] provides reference evaluators for the training objective.
//!
//! ```
//! use freqaug::filters::{apply_filter, ButterworthParams, ChannelFilter, FilterSpec};
//! use freqaug::image::Image;
//!
//! let img = Image::new(4, 4, 1, (0..16).map(|i| i as f64 / 15.0).collect()).unwrap();
//! let spec = FilterSpec::shared(ChannelFilter::butterworth(
//!     ButterworthParams::new(0.04, 2).unwrap(),
//! ))
//! .unwrap();
//! let out = apply_filter(&img, &spec, "ramp").unwrap();
//! assert!(out.image.data().iter().all(|v| (0.0..=1.0).contains(v)));
//! ```

pub mod bench;
pub mod blending;
pub mod diversity;
pub mod error;
pub mod fft;
pub mod filters;
pub mod image;
pub mod io;
pub mod losses;
pub mod npy;
pub mod pipeline;
pub mod rng;
pub mod saliency;
pub mod synthetic;

pub use error::{Error, Result};
pub use image::{Field, Image};
