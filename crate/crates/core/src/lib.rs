//! Iterative detection and decoding for MIMO links: log-domain PDA and MAP
//! detectors, a parallel-concatenated convolutional code, the turbo loop
//! between them, and a Monte-Carlo measurement harness.

pub mod channel;
pub mod harness;
pub mod idd;
pub mod map_detector;
pub mod modem;
pub mod numerics;
pub mod pda;
pub mod turbo;
