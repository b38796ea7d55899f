//! Indexed tri/quad meshes and the operations every other module builds on.

mod obj;
mod sample;
mod topology;
mod transform;
mod weld;

pub use obj::{format_float, load_obj, parse_obj, save_obj, write_obj};
pub use sample::{sample_points, PointSample};
pub use topology::{
    bfs_distances, bfs_rings, boundary_loops, boundary_vertices, SeamLoop, connected_components,
    edge_incidence, is_connected, largest_connected_component, open_boundary_vertices,
    shortest_path, Adjacency, FaceAdjacencyGraph,
};
pub use transform::{normalize_jointly, normalize_unit_sphere, Similarity};
pub use weld::{weld_patch, WeldPair, WeldResult};

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::spatial::triangle_area;
use crate::{FaceSet, Point, Vector};

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: face has {arity} vertices, only triangles and quads are supported")]
    Arity { line: usize, arity: usize },
    #[error("degenerate face {face}: repeated vertex index")]
    DegenerateFace { face: usize },
    #[error("face {face} references vertex {index}, but the mesh has {count} vertices")]
    IndexOutOfRange { face: usize, index: usize, count: usize },
    #[error("face id {0} out of range")]
    FaceOutOfRange(usize),
    #[error("all vertices coincide; cannot normalize")]
    ZeroScale,
    #[error("mesh has no vertices")]
    Empty,
    #[error("mesh has zero total area")]
    ZeroArea,
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error("weld tolerance must be positive")]
    BadTolerance,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A triangle or a quad, stored as vertex indices in winding order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Face {
    Tri([usize; 3]),
    Quad([usize; 4]),
}

impl Face {
    /// Builds a face from 3 or 4 indices; any other length is `None`.
    pub fn from_slice(idx: &[usize]) -> Option<Face> {
        match *idx {
            [a, b, c] => Some(Face::Tri([a, b, c])),
            [a, b, c, d] => Some(Face::Quad([a, b, c, d])),
            _ => None,
        }
    }

    pub fn vertices(&self) -> &[usize] {
        match self {
            Face::Tri(v) => v,
            Face::Quad(v) => v,
        }
    }

    pub fn arity(&self) -> usize {
        self.vertices().len()
    }

    pub fn is_quad(&self) -> bool {
        matches!(self, Face::Quad(_))
    }

    pub fn is_degenerate(&self) -> bool {
        let v = self.vertices();
        (0..v.len()).any(|i| (i + 1..v.len()).any(|j| v[i] == v[j]))
    }

    /// Fan triangulation in stored order: quads split along the 0-2 diagonal.
    pub fn triangles(&self) -> impl Iterator<Item = [usize; 3]> {
        let (first, second) = match *self {
            Face::Tri([a, b, c]) => ([a, b, c], None),
            Face::Quad([a, b, c, d]) => ([a, b, c], Some([a, c, d])),
        };
        std::iter::once(first).chain(second)
    }

    /// Directed edges in winding order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let v = self.vertices();
        (0..v.len()).map(move |i| (v[i], v[(i + 1) % v.len()]))
    }

    pub fn reversed(&self) -> Face {
        match *self {
            Face::Tri([a, b, c]) => Face::Tri([a, c, b]),
            Face::Quad([a, b, c, d]) => Face::Quad([a, d, c, b]),
        }
    }

    pub fn map(&self, mut f: impl FnMut(usize) -> usize) -> Face {
        match *self {
            Face::Tri([a, b, c]) => Face::Tri([f(a), f(b), f(c)]),
            Face::Quad([a, b, c, d]) => Face::Quad([f(a), f(b), f(c), f(d)]),
        }
    }
}

/// Indexed vertex/face soup. Face winding defines the front side.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub faces: Vec<Face>,
}

impl Mesh {
    /// Builds a mesh and checks index range and degeneracy.
    pub fn new(vertices: Vec<Point>, faces: Vec<Face>) -> Result<Mesh, MeshError> {
        let mesh = Mesh { vertices, faces };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        let count = self.vertices.len();
        for (fid, face) in self.faces.iter().enumerate() {
            if let Some(&index) = face.vertices().iter().find(|&&v| v >= count) {
                return Err(MeshError::IndexOutOfRange { face: fid, index, count });
            }
            if face.is_degenerate() {
                return Err(MeshError::DegenerateFace { face: fid });
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn face_points(&self, face: usize) -> impl Iterator<Item = Point> + '_ {
        self.faces[face].vertices().iter().map(move |&v| self.vertices[v])
    }

    /// Newell normal, unit length; zero for a degenerate face. For quads this is
    /// the normal of the least-squares plane through the four corners.
    pub fn face_normal(&self, face: usize) -> Vector {
        let v = self.faces[face].vertices();
        let mut n = Vector::zeros();
        for i in 0..v.len() {
            let a = self.vertices[v[i]];
            let b = self.vertices[v[(i + 1) % v.len()]];
            n.x += (a.y - b.y) * (a.z + b.z);
            n.y += (a.z - b.z) * (a.x + b.x);
            n.z += (a.x - b.x) * (a.y + b.y);
        }
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            n
        }
    }

    pub fn face_area(&self, face: usize) -> f64 {
        self.faces[face]
            .triangles()
            .map(|[a, b, c]| triangle_area(&self.vertices[a], &self.vertices[b], &self.vertices[c]))
            .sum()
    }

    pub fn face_centroid(&self, face: usize) -> Point {
        let v = self.faces[face].vertices();
        let sum = v.iter().fold(Vector::zeros(), |acc, &i| acc + self.vertices[i].coords);
        Point::from(sum / v.len() as f64)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    pub fn check_face(&self, face: usize) -> Result<(), MeshError> {
        if face < self.faces.len() {
            Ok(())
        } else {
            Err(MeshError::FaceOutOfRange(face))
        }
    }

    /// Vertices referenced by at least one face.
    pub fn referenced_vertices(&self) -> Vec<bool> {
        let mut used = vec![false; self.vertices.len()];
        for face in &self.faces {
            for &v in face.vertices() {
                used[v] = true;
            }
        }
        used
    }

    /// Vertex ids used by the given faces.
    pub fn vertices_of<'a>(&self, faces: impl IntoIterator<Item = &'a usize>) -> BTreeSet<usize> {
        faces
            .into_iter()
            .flat_map(|&f| self.faces[f].vertices().iter().copied())
            .collect()
    }

    /// Extracts the given faces (in iteration order) with a compact vertex
    /// table. Vertices keep their relative order from the parent mesh.
    pub fn submesh<'a>(&self, faces: impl IntoIterator<Item = &'a usize>) -> Mesh {
        let picked: Vec<usize> = faces.into_iter().copied().collect();
        let used: BTreeSet<usize> = self.vertices_of(&picked);
        let remap: HashMap<usize, usize> = used.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        Mesh {
            vertices: used.iter().map(|&v| self.vertices[v]).collect(),
            faces: picked.iter().map(|&f| self.faces[f].map(|v| remap[&v])).collect(),
        }
    }

    /// Drops the given faces, keeping the vertex table and the relative order
    /// of the surviving faces.
    pub fn without_faces(&self, remove: &FaceSet) -> Mesh {
        Mesh {
            vertices: self.vertices.clone(),
            faces: self
                .faces
                .iter()
                .enumerate()
                .filter(|(f, _)| !remove.contains(f))
                .map(|(_, face)| *face)
                .collect(),
        }
    }

    /// Removes unreferenced vertices. Returns the old-to-new vertex map.
    pub fn compacted(&self) -> (Mesh, Vec<Option<usize>>) {
        let used = self.referenced_vertices();
        let mut remap = vec![None; self.vertices.len()];
        let mut vertices = Vec::new();
        for (old, &keep) in used.iter().enumerate() {
            if keep {
                remap[old] = Some(vertices.len());
                vertices.push(self.vertices[old]);
            }
        }
        let faces = self
            .faces
            .iter()
            .map(|face| face.map(|v| remap[v].expect("referenced vertex")))
            .collect();
        (Mesh { vertices, faces }, remap)
    }

    /// Appends another mesh's vertices and faces.
    pub fn append(&mut self, other: &Mesh) {
        let offset = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.faces.extend(other.faces.iter().map(|f| f.map(|v| v + offset)));
    }

    pub fn bounding_box(&self) -> Option<(Point, Point)> {
        bounding_box(self.vertices.iter())
    }

    /// Bounding box of the vertices referenced by the given faces.
    pub fn faces_bounding_box<'a>(&self, faces: impl IntoIterator<Item = &'a usize>) -> Option<(Point, Point)> {
        let verts = self.vertices_of(faces);
        bounding_box(verts.iter().map(|&v| &self.vertices[v]))
    }
}

pub(crate) fn bounding_box<'a>(points: impl Iterator<Item = &'a Point>) -> Option<(Point, Point)> {
    let mut iter = points.peekable();
    let first = **iter.peek()?;
    Some(iter.fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p))))
}
