//! Spatial queries: nearest neighbours over point sets and ray / closest-point
//! queries over triangle soups.

mod bvh;
mod geometry;
mod kdtree;

pub use bvh::{ClosestHit, RayHit, TriangleBvh};
pub use geometry::{closest_point_on_triangle, ray_triangle, triangle_area, triangle_normal};
pub use kdtree::NnIndex;
