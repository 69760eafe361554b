pub mod app;
pub mod dsp;
pub mod format;
pub mod nn;
pub mod numerics;
pub mod prune;
pub mod sim;
pub mod quant;
