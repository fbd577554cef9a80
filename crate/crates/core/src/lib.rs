//! Evaluation, topology-aware loss and multi-scale mask fusion for
//! segmenting metal lines in SEM images of integrated-circuit layers.
//!
//! * [`image`]: raster types, component labeling, morphology, resampling
//! * [`metrics`]: ESD (opens/shorts/false positives/false negatives) and pixel metrics
//! * [`persistence`]: cubical persistence barcodes in dimensions 0 and 1
//! * [`loss`]: BCE, Dice and Betti matching losses with gradients
//! * [`fusion`]: patch planning and the full-image/patch decision procedure
//! * [`prompts`]: classical point-prompt generation
//! * [`synth`]: synthetic metal-layer images, defect injection, augmentation
//! * [`io`]: PNG and `MLF1` float raster files
//! * [`report`]: evaluation reports and stable JSON output

pub mod error;
pub mod fusion;
pub mod image;
pub mod io;
pub mod loss;
pub mod metrics;
pub mod persistence;
pub mod prompts;
pub mod report;
pub mod synth;
mod unionfind;

pub use error::{Error, Result};
pub use image::{BinaryMask, Connectivity, GrayImage, LikelihoodMap};
pub use metrics::{esd_errors, pixel_metrics, EsdReport, PixelMetrics};
pub use persistence::{barcode, betti_numbers, Barcode, Filtration, PersistenceBar};
