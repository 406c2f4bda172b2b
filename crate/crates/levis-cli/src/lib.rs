//! Support library for the `levis` binary: synthetic dispatch data, the
//! fixture trainer, and SVG rendering of ball unions.

pub mod dispatch;
pub mod svg;
pub mod train;
