#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use meshfim_core::mesh::{parse_obj, save_obj, write_obj, FaceAdjacencyGraph, Mesh};
use meshfim_core::region::{sample_bfs_region, RegionSpec};
use meshfim_core::synth;

pub fn meshfim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meshfim")).args(args).env_remove("MESHFIM_WORKSPACE").output().unwrap()
}

/// Runs the binary and fails the test with its stderr unless it exits 0.
pub fn meshfim_ok(args: &[&str]) {
    let out = meshfim(args);
    assert!(out.status.success(), "meshfim {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

pub fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// What a mesh looks like after an OBJ round trip, as the binary sees it.
pub fn as_stored(mesh: &Mesh) -> Mesh {
    parse_obj(&write_obj(mesh)).unwrap()
}

pub fn write_mesh(dir: &Path, name: &str, mesh: &Mesh) -> PathBuf {
    let path = dir.join(name);
    save_obj(&path, mesh).unwrap();
    path
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn sphere() -> Mesh {
    as_stored(&synth::uv_sphere(16, 32, 1.0))
}

/// A closed quad-dominant mesh not used by any other fixture.
pub fn held_out() -> Mesh {
    as_stored(&synth::bumpy(&synth::cube_sphere(7, 1.3), 0.04, 9017))
}

pub fn bfs_region(mesh: &Mesh, seed_face: usize, budget: usize, w: usize) -> RegionSpec {
    sample_bfs_region(mesh, &FaceAdjacencyGraph::build(mesh), seed_face, budget, w).unwrap()
}
