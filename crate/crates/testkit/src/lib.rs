//! Test support for the citation index: seeded synthetic dump generators and
//! independent oracle implementations of the codec, calendar arithmetic,
//! checksums, and the whole citation pipeline.
//!
//! Nothing here depends on the production crates; the oracles are separate
//! routes to the same answers, so tests comparing the two catch mistakes in
//! either.

pub mod checksums;
pub mod codec;
pub mod dates;
pub mod gen;
pub mod pipeline;
pub mod stubserver;
