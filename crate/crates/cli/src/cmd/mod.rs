pub mod eval;
pub mod gradients;
pub mod init_labels;
pub mod plot;
pub mod refine;
pub mod synth;
