use std::path::Path;
use std::sync::Arc;

use anyhow::{Context, Result};
use hsc_core::body::{BodyModel, BodyParams};
use hsc_core::contact::{annotate_contact, ContactConfig, ContactVector};
use hsc_core::geometry::io::{load_mesh, MeshFormat};
use hsc_core::geometry::{rigid_align, Bvh, Mesh, RigidTransform};
use hsc_core::Execution;
use log::{info, warn};

use crate::files::{read_correspondences, write_json};
use crate::manifest::{DatasetManifest, SceneEntry};

/// Poses every frame, moves it into the scan frame and labels contact.
pub fn label_frames(
    model: &BodyModel,
    frames: &[BodyParams],
    scene: &Bvh,
    align: &RigidTransform,
    cfg: &ContactConfig,
    exec: Execution,
) -> Result<Vec<ContactVector>> {
    frames
        .iter()
        .map(|p| {
            let posed = model.pose_body(p)?;
            let placed = Mesh::new(posed.vertices.iter().map(|v| align.apply(v)).collect(), model.faces().to_vec())?;
            Ok(annotate_contact(
                model.topology_name(),
                placed.vertices(),
                placed.vertex_normals(),
                model.regions(),
                scene,
                cfg,
                exec,
            )?)
        })
        .collect()
}

/// A scan with its capture-to-scan alignment.
pub struct LoadedScene {
    pub bvh: Bvh,
    pub align: RigidTransform,
}

/// Loads the scan, solves the alignment from the correspondence file and
/// stores it next to the scan.
pub fn load_scene(root: &Path, scene: &SceneEntry) -> Result<LoadedScene> {
    let path = root.join(&scene.mesh);
    let format = MeshFormat::from_path(&path).with_context(|| format!("unknown mesh format {}", path.display()))?;
    let mesh = load_mesh(&path, format)?;
    let (src, dst) = read_correspondences(&root.join(&scene.correspondences))?;
    let fit = rigid_align(&src, &dst).with_context(|| format!("aligning scene {}", scene.id))?;
    if fit.rms > 0.01 {
        warn!("scene {}: alignment rms {:.1} mm", scene.id, fit.rms * 1000.0);
    } else {
        info!("scene {}: alignment rms {:.3} mm", scene.id, fit.rms * 1000.0);
    }
    write_json(&root.join(DatasetManifest::alignment(&scene.id)), &fit.transform)?;
    Ok(LoadedScene { bvh: Bvh::new(Arc::new(mesh))?, align: fit.transform })
}
