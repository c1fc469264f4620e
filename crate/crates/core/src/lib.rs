//! Markerless human-scene contact capture.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`] – triangle meshes, BVH closest-point queries, edge-graph
//!   geodesics, rigid registration and mesh I/O.
//! * [`body`] – the articulated body model (blendshapes, kinematic tree,
//!   linear blend skinning), topology maps and a procedural test humanoid.
//! * [`camera`] – pinhole cameras, triangulation, multiview consensus
//!   weighting and fusion of per-view pose estimates.
//! * [`fitting`] – robust multiview objectives and their Levenberg-Marquardt
//!   minimisation, per frame and over temporal windows.
//! * [`contact`] – dense per-vertex contact annotation against a scene scan.
//! * [`metrics`] – contact detection scores, geodesic error, MPJPE / V2V.
//! * [`predictor`] – a small per-vertex contact classifier trained with
//!   binary cross entropy and masked-vertex augmentation.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled and falls back to plain iterators otherwise.

pub mod body;
pub mod camera;
pub mod contact;
pub mod error;
pub mod fitting;
pub mod geometry;
pub mod metrics;
pub mod par;
pub mod predictor;
pub mod rotation;
pub mod synthetic;

pub use error::{Error, Result};
pub use par::Execution;
