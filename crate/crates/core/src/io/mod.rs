//! On-disk formats: `UFV1` feature files and binary masks.

pub mod pgm;
pub mod ufv;
