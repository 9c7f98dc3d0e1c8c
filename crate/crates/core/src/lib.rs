//! Open-set individual re-identification for elephants.
//!
//! Two sources of evidence are combined:
//!
//! * [`seek`]: a structured manual attribute code (sex, age, tusks, ear
//!   features, extreme features) and a weighted, wildcard-aware distance.
//! * [`contour`]: ear-margin contours turned into multi-scale integral
//!   curvature, keypoints and descriptors.
//!
//! [`index`] stores descriptors of confirmed individuals, scores queries with
//! local naive Bayes nearest neighbours and fuses the result with the code
//! distance into a ranked candidate list. [`eval`], [`report`] and [`synth`]
//! work on [`dump::RegistryDump`] archives.

pub mod contour;
pub mod dump;
pub mod eval;
pub mod gallery;
pub mod index;
mod par;
pub mod report;
pub mod seek;
pub mod synth;

pub use contour::{Contour, ContourConfig, ContourEngine, Descriptor, EarSide};
pub use dump::RegistryDump;
pub use index::{DescriptorIndex, FusionConfig, IndividualId, RankedMatch};
pub use seek::{SeekCode, SeekSchema, SeekWeights};
