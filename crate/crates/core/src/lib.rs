//! Centerline graphs, morphometry and variant classification for
//! Circle-of-Willis segmentation masks.

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anatomy;
pub mod connector;
pub mod evaluator;
pub mod graph_builder;
pub mod morphometry;
pub mod phantom;
pub mod pipeline;
pub mod radii;
pub mod skeletonizer;
pub mod util;
pub mod variants;
pub mod volume_io;
