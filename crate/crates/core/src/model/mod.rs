//! Images, masks, manifests and filter configuration.

mod config;
mod image;
mod manifest;
mod mask;

pub use self::config::{FilterConfig, ThresholdMode};
pub use self::image::{load_image, save_image, ImageBuffer};
pub use self::manifest::{
    manifest_base_dir, mask_path_for, parse_manifest, read_manifest, write_manifest, PairRecord,
    PairResources,
};
pub use self::mask::{load_mask, save_mask, Mask, Region, RegionMaskSet, MASK_BINARIZE_LEVEL};
