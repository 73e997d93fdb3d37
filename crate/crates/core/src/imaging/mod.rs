//! Camera response, exposure fusion and image files.

mod buffer;
mod crf;
mod io;
mod merge;

pub use buffer::{ImageBuffer, ImageKind};
pub use crf::{expose, fit_gamma, linearize, Crf, CrfPair};
pub use io::{
    read_image, read_mask, read_pfm, read_png, write_image, write_mask, write_pfm, write_png,
};
pub use merge::{
    merge_hdr, merge_weight_fast, merge_weight_well, ExposureFactor, MergeThresholds, MergedHdr,
};
