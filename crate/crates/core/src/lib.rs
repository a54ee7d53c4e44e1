pub mod aliasing;
pub mod cli;
pub mod array;
pub mod coil;
pub mod data;
pub mod denoise;
pub mod error;
pub mod eval;
pub mod fft;
pub mod io;
pub mod sampling;
pub mod solver;
pub mod wavelet;

pub use array::{ComplexImage, MultiCoilKSpace, C64};
pub use error::{Error, Result};
