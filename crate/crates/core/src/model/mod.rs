//! Domain types, file formats and covariance algebra.

pub mod camera;
pub mod convert;
pub mod covariance;
pub mod dump;
pub mod gaussian;
pub mod mesh;
pub mod mesh_io;
pub mod ply;
pub mod volume;

pub use camera::{CameraFrame, CameraPose, DepthMap};
pub use convert::{convert_2dgs_scene, Surfel, SurfelScene};
pub use covariance::{covariance_of, refit_aligned, refit_rotation_scale, Covariance3};
pub use gaussian::{Gaussian, GaussianScene, Mat3, Vec3};
pub use mesh::CageMesh;
pub use mesh_io::{load_mesh, save_mesh};
pub use ply::{load_gaussian_ply, load_surfel_ply, save_gaussian_ply};
pub use volume::{GridSpec, TsdfVolume, VoxelGrid};
