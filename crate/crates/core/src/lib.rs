//! TKIP attack research toolkit.
//!
//! Michael forward and reverse computation, magic-word collision search,
//! keystream harvesting and the concatenation attacks, all run against an
//! in-process simulated WPA network.

pub mod addr;
pub mod attacks;
pub mod bench;
pub mod collision;
pub mod frames;
pub mod michael;
pub mod keystream;
pub mod simnet;
