//! Segment distances and the concordance correlation coefficient.

mod ccc;
pub(crate) mod distance;

pub use ccc::{ccc, ccc_gradient, ccc_loss, CccReport};
pub use distance::{centroid, centroid_dp, centroid_l2, cosine_distance, DistanceMetric};

pub(crate) use distance::{cosine_frames, l2_between, neg_dot};
