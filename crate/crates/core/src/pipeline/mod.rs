//! Dataset plumbing: file formats, preprocessing, batch synthesis, evaluation.

pub mod demo;
pub mod eval;
pub mod io;
pub mod preprocess;
pub mod synth;

pub use demo::{boundary_gradient, demo, seam_rect, DemoOutput};
pub use eval::evaluate;
pub use preprocess::preprocess;
pub use synth::{apply_ablations, generate_sample, synthesize, Ablation, DatasetSpec, TaskMode};
