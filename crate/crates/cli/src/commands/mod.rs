pub mod bench;
pub mod eval;
pub mod gradcheck;
pub mod predict;
pub mod synth;
pub mod train;
