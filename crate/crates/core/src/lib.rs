pub mod dsp;
pub mod features;
pub mod pipeline;
pub mod reduction;
pub mod signal_io;
pub mod svm;
