use serde::{Deserialize, Serialize};

use super::RepairError;
use crate::mesh::{sample_points, weld_patch, Mesh, MeshError};
use crate::metrics::{overflow_ratio, OVERFLOW_EPS, OVERFLOW_THETA, PATCH_SAMPLES};
use crate::FaceSet;

/// Patch vertices this close to an open seam vertex are welded onto it.
pub const WELD_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateConfig {
    pub eps_ovf: f64,
    pub theta_ovf: f64,
    pub tau_weld: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig {
            eps_ovf: OVERFLOW_EPS,
            theta_ovf: OVERFLOW_THETA,
            tau_weld: WELD_TOLERANCE,
            samples: PATCH_SAMPLES,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateVerdict {
    pub overflow_ratio: f64,
    /// True exactly when `overflow_ratio <= theta_ovf`.
    pub accepted: bool,
    pub eps_ovf: f64,
    pub theta_ovf: f64,
}

#[derive(Clone, Debug)]
pub enum MergeOutcome {
    /// The gate passed. `mesh` keeps the surviving faces in their old order,
    /// followed by the patch faces; the vertex table is not compacted.
    Merged {
        verdict: GateVerdict,
        mesh: Mesh,
        welded: usize,
        collapsed_faces: usize,
    },
    Rejected {
        verdict: GateVerdict,
    },
    /// Nothing to gate: the patch has no faces or no area.
    Unusable {
        reason: String,
    },
}

impl MergeOutcome {
    pub fn merged(&self) -> Option<&Mesh> {
        match self {
            MergeOutcome::Merged { mesh, .. } => Some(mesh),
            _ => None,
        }
    }

    pub fn verdict(&self) -> Option<&GateVerdict> {
        match self {
            MergeOutcome::Merged { verdict, .. } | MergeOutcome::Rejected { verdict } => Some(verdict),
            MergeOutcome::Unusable { .. } => None,
        }
    }
}

/// Overflow of `patch` against everything in `current` outside `target` and
/// `context`.
pub fn gate(current: &Mesh, target: &FaceSet, context: &FaceSet, patch: &Mesh, cfg: &GateConfig) -> Result<GateVerdict, MeshError> {
    let points = sample_points(patch, cfg.samples, cfg.seed)?.positions;
    let residual: Vec<usize> = (0..current.faces.len()).filter(|f| !target.contains(f) && !context.contains(f)).collect();
    let ratio = overflow_ratio(&points, &current.submesh(&residual), cfg.eps_ovf);
    Ok(GateVerdict { overflow_ratio: ratio, accepted: ratio <= cfg.theta_ovf, eps_ovf: cfg.eps_ovf, theta_ovf: cfg.theta_ovf })
}

/// Gates the patch, then removes `target` from `current`, welds the patch
/// onto the opened seam and appends it.
pub fn quality_gate_merge(
    current: &Mesh,
    target: &FaceSet,
    context: &FaceSet,
    patch: &Mesh,
    cfg: &GateConfig,
) -> Result<MergeOutcome, RepairError> {
    for &f in target.iter().chain(context) {
        current.check_face(f)?;
    }
    patch.validate()?;
    if patch.faces.is_empty() {
        return Ok(MergeOutcome::Unusable { reason: "patch has no faces".into() });
    }
    let verdict = match gate(current, target, context, patch, cfg) {
        Ok(v) => v,
        Err(MeshError::ZeroArea) => return Ok(MergeOutcome::Unusable { reason: "patch has no area".into() }),
        Err(e) => return Err(e.into()),
    };
    if !verdict.accepted {
        log::info!("patch rejected: overflow {:.4} > {}", verdict.overflow_ratio, cfg.theta_ovf);
        return Ok(MergeOutcome::Rejected { verdict });
    }
    let base = current.without_faces(target);
    let weld = weld_patch(&base, patch, cfg.tau_weld)?;
    Ok(MergeOutcome::Merged { verdict, mesh: weld.mesh, welded: weld.pairs.len(), collapsed_faces: weld.collapsed_faces })
}
