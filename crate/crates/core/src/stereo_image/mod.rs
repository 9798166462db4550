//! Stereo image data model, PPM/PFM file I/O, patch grids and synthetic scenes.

mod image;
pub mod io;
mod patches;
mod scene;

pub use image::{DisparityMap, Image, StereoPair};
pub use io::{load_pfm, load_ppm, save_pfm, save_ppm};
pub use patches::{extract_patches, PatchGrid, DEFAULT_PATCH_SIZE};
pub use scene::{gen_scene, random_rects, render_scene, RectSpec};
