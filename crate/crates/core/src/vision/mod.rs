//! Camera-frame processing: threshold, isolate the module, reduce its
//! silhouette to a triangle and read off the bend angle.

mod image;
mod pgm;
mod pipeline;

pub use image::{BinaryImage, CameraIntrinsics, GrayImage, MIN_DIMENSION};
pub use pgm::{decode_pgm, encode_pgm, read_pgm, write_pgm};
pub use pipeline::{
    add_gaussian_noise, estimate_angle, extract_corners, largest_component, render_frame,
    threshold, AngleMeasurement, DEFAULT_THRESHOLD, DEGENERATE_BASE_ANGLE_DEG, FOREGROUND_LEVEL,
    BACKGROUND_LEVEL, MIN_COMPONENT_PIXELS,
};
