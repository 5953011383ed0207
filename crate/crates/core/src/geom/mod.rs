//! Geometric building blocks: bounding volumes, convex hulls, exact
//! triangle predicates and ray casting.

pub mod bvh;
pub mod hull;
pub mod ray;
pub mod selfint;
pub mod tritri;

pub use bvh::{Aabb, Bvh};
pub use hull::ConvexHull;
