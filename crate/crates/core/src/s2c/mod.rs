//! Steps-to-cost safety representation: trajectory labelling, binning, the
//! FIFO training buffer and the softmax model whose frozen snapshot augments
//! agent observations.

pub mod buffer;
pub mod label;
pub mod model;

pub use buffer::S2CBuffer;
pub use label::{bin_index, label_trajectory, num_bins, SafetyLabel};
pub use model::{augment, S2CModel, SafetyConfig, SafetyDistribution};
