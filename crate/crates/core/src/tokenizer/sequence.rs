use std::cmp::Ordering;
use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{QuantizationSpec, Token, TokenError};
use crate::mesh::{Face, Mesh};
use crate::{FaceSet, VertexSet};

pub const FLAG_CONTEXT: u8 = 1;
pub const FLAG_BOUNDARY: u8 = 2;

/// Tokens per face block: four vertices of three coordinates each.
pub const BLOCK_LEN: usize = 12;

/// A context/target token stream:
/// `[S_ctx] context blocks [E_ctx] target blocks [eos]`.
///
/// `flags[i]` carries [`FLAG_CONTEXT`] on every context coordinate token and
/// [`FLAG_BOUNDARY`] on context tokens of seam vertices. `ctx_pos[i]` counts
/// context coordinate tokens from zero and is `None` everywhere else.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FimSequence {
    pub tokens: Vec<Token>,
    pub flags: Vec<u8>,
    pub ctx_pos: Vec<Option<u32>>,
    pub bins: u32,
}

/// Where each block of a serialized sequence came from: the source face id
/// and the source vertex id in each of the four slots.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FimLayout {
    pub context: Vec<(usize, [usize; 4])>,
    pub target: Vec<(usize, [usize; 4])>,
}

/// A face whose vertex tokens are ordered as they will be emitted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FaceBlock {
    pub tokens: [Token; BLOCK_LEN],
    pub is_quad: bool,
}

#[derive(Clone, Debug)]
struct Keyed {
    face: usize,
    slots: [usize; 4],
    block: FaceBlock,
    // vertex keys in (y, x, z) order, rotated
    key: Vec<[Token; 3]>,
}

fn yxz(t: &[Token; 3]) -> [Token; 3] {
    [t[1], t[0], t[2]]
}

/// Rotation of the face that starts at its lowest vertex under the (Y, X, Z)
/// key. Repeated lowest vertices (possible after quantization) are resolved by
/// comparing the whole rotated key sequence.
fn canonical_rotation(keys: &[[Token; 3]]) -> usize {
    (0..keys.len())
        .min_by(|&a, &b| {
            let ra = (0..keys.len()).map(|i| keys[(a + i) % keys.len()]);
            let rb = (0..keys.len()).map(|i| keys[(b + i) % keys.len()]);
            ra.cmp(rb)
        })
        .unwrap_or(0)
}

fn keyed_faces(mesh: &Mesh, faces: &FaceSet, spec: &QuantizationSpec) -> Result<Vec<Keyed>, TokenError> {
    let mut cache: HashMap<usize, [Token; 3]> = HashMap::new();
    let mut out = Vec::with_capacity(faces.len());
    for &f in faces {
        let verts = mesh.faces[f].vertices();
        let mut toks = Vec::with_capacity(verts.len());
        for &v in verts {
            let t = match cache.get(&v) {
                Some(t) => *t,
                None => {
                    let t = spec.quantize_point(&mesh.vertices[v])?;
                    cache.insert(v, t);
                    t
                }
            };
            toks.push(t);
        }
        let keys: Vec<[Token; 3]> = toks.iter().map(yxz).collect();
        let r = canonical_rotation(&keys);
        let n = verts.len();
        let order: Vec<usize> = (0..n).map(|i| (r + i) % n).collect();
        let mut slots = [0; 4];
        let mut tokens = [0; BLOCK_LEN];
        for s in 0..4 {
            // triangles repeat their third vertex in the fourth slot
            let i = order[s.min(n - 1)];
            slots[s] = verts[i];
            tokens[3 * s..3 * s + 3].copy_from_slice(&toks[i]);
        }
        out.push(Keyed {
            face: f,
            slots,
            block: FaceBlock { tokens, is_quad: n == 4 },
            key: order.iter().map(|&i| keys[i]).collect(),
        });
    }
    Ok(out)
}

fn compare_keyed(a: &Keyed, b: &Keyed) -> Ordering {
    // lowest vertex first; the remaining vertices break ties so the output
    // does not depend on input order
    a.key.cmp(&b.key).then_with(|| a.block.tokens.cmp(&b.block.tokens))
}

fn sorted_blocks(mesh: &Mesh, faces: &FaceSet, spec: &QuantizationSpec) -> Result<Vec<Keyed>, TokenError> {
    spec.validate()?;
    if let Some(&bad) = faces.iter().find(|&&f| f >= mesh.faces.len()) {
        return Err(TokenError::FaceOutOfRange(bad));
    }
    let mut keyed = keyed_faces(mesh, faces, spec)?;
    keyed.sort_by(compare_keyed);
    Ok(keyed)
}

/// Face blocks of `faces` in canonical order.
pub fn face_blocks(mesh: &Mesh, faces: &FaceSet, spec: &QuantizationSpec) -> Result<Vec<FaceBlock>, TokenError> {
    Ok(sorted_blocks(mesh, faces, spec)?.into_iter().map(|k| k.block).collect())
}

/// Reorders faces bottom-to-top by the (Y, X, Z) tokens of their lowest
/// vertex and rotates each face to start at that vertex, keeping winding.
/// The vertex table is unchanged.
pub fn canonical_sort(mesh: &Mesh, spec: &QuantizationSpec) -> Result<Mesh, TokenError> {
    let all: FaceSet = (0..mesh.faces.len()).collect();
    let keyed = sorted_blocks(mesh, &all, spec)?;
    let faces = keyed
        .iter()
        .map(|k| {
            let n = mesh.faces[k.face].arity();
            Face::from_slice(&k.slots[..n]).expect("arity 3 or 4")
        })
        .collect();
    Ok(Mesh { vertices: mesh.vertices.clone(), faces })
}

/// Serializes context then target, each canonically sorted on its own.
pub fn serialize_fim(
    mesh: &Mesh,
    context: &FaceSet,
    target: &FaceSet,
    boundary: &VertexSet,
    spec: &QuantizationSpec,
) -> Result<FimSequence, TokenError> {
    serialize_fim_with_layout(mesh, context, target, boundary, spec).map(|(seq, _)| seq)
}

/// [`serialize_fim`] plus the face and vertex ids behind every block.
pub fn serialize_fim_with_layout(
    mesh: &Mesh,
    context: &FaceSet,
    target: &FaceSet,
    boundary: &VertexSet,
    spec: &QuantizationSpec,
) -> Result<(FimSequence, FimLayout), TokenError> {
    if let Some(&f) = context.intersection(target).next() {
        return Err(TokenError::Overlap(f));
    }
    let ctx = sorted_blocks(mesh, context, spec)?;
    let tgt = sorted_blocks(mesh, target, spec)?;
    let s = spec.sentinels();
    let n = 3 + BLOCK_LEN * (ctx.len() + tgt.len());
    let mut seq = FimSequence {
        tokens: Vec::with_capacity(n),
        flags: Vec::with_capacity(n),
        ctx_pos: Vec::with_capacity(n),
        bins: spec.bins,
    };
    seq.push(s.s_ctx, 0, None);
    let mut pos = 0u32;
    for k in &ctx {
        for (i, &t) in k.block.tokens.iter().enumerate() {
            let marked = boundary.contains(&k.slots[i / 3]);
            seq.push(t, FLAG_CONTEXT | if marked { FLAG_BOUNDARY } else { 0 }, Some(pos));
            pos += 1;
        }
    }
    seq.push(s.e_ctx, 0, None);
    for k in &tgt {
        for &t in &k.block.tokens {
            seq.push(t, 0, None);
        }
    }
    seq.push(s.eos, 0, None);
    let layout = FimLayout {
        context: ctx.iter().map(|k| (k.face, k.slots)).collect(),
        target: tgt.iter().map(|k| (k.face, k.slots)).collect(),
    };
    Ok((seq, layout))
}

impl FimSequence {
    fn push(&mut self, token: Token, flag: u8, pos: Option<u32>) {
        self.tokens.push(token);
        self.flags.push(flag);
        self.ctx_pos.push(pos);
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn spec(&self) -> QuantizationSpec {
        QuantizationSpec::with_bins(self.bins)
    }

    /// Index of the `E_ctx` sentinel after validating the overall structure.
    fn split(&self) -> Result<usize, TokenError> {
        let s = self.spec().sentinels();
        let malformed = |m: &str| Err(TokenError::Malformed(m.to_string()));
        if self.tokens.first() != Some(&s.s_ctx) {
            return malformed("sequence must start with S_ctx");
        }
        if self.tokens.last() != Some(&s.eos) || self.tokens.len() < 3 {
            return malformed("sequence must end with eos");
        }
        let body = &self.tokens[1..self.tokens.len() - 1];
        let e = match body.iter().position(|&t| t == s.e_ctx) {
            Some(i) => i + 1,
            None => return malformed("missing E_ctx"),
        };
        if let Some(i) = self.tokens[1..self.tokens.len() - 1].iter().position(|&t| t >= self.bins && t != s.e_ctx) {
            return Err(TokenError::Malformed(format!("unexpected sentinel {} at {}", self.tokens[i + 1], i + 1)));
        }
        if body.iter().filter(|&&t| t == s.e_ctx).count() != 1 {
            return malformed("more than one E_ctx");
        }
        let ctx_len = e - 1;
        let tgt_len = self.tokens.len() - e - 2;
        if ctx_len % BLOCK_LEN != 0 {
            return Err(TokenError::Malformed(format!("context segment length {ctx_len} is not a multiple of 12")));
        }
        if !tgt_len.is_multiple_of(BLOCK_LEN) {
            return Err(TokenError::Malformed(format!("target segment length {tgt_len} is not a multiple of 12")));
        }
        Ok(e)
    }

    pub fn context_segment(&self) -> Result<&[Token], TokenError> {
        let e = self.split()?;
        Ok(&self.tokens[1..e])
    }

    pub fn target_segment(&self) -> Result<&[Token], TokenError> {
        let e = self.split()?;
        Ok(&self.tokens[e + 1..self.tokens.len() - 1])
    }

    /// Checks sentinel layout plus flag and position consistency.
    pub fn validate(&self) -> Result<(), TokenError> {
        if self.flags.len() != self.tokens.len() || self.ctx_pos.len() != self.tokens.len() {
            return Err(TokenError::Malformed("tokens, flags and ctx_pos differ in length".into()));
        }
        let e = self.split()?;
        let mut next = 0u32;
        for i in 0..self.tokens.len() {
            let in_ctx = i >= 1 && i < e;
            let f = self.flags[i];
            if f & !(FLAG_CONTEXT | FLAG_BOUNDARY) != 0 {
                return Err(TokenError::Malformed(format!("unknown flag bits {f:#04x} at {i}")));
            }
            if in_ctx != (f & FLAG_CONTEXT != 0) {
                return Err(TokenError::Malformed(format!("context flag wrong at {i}")));
            }
            if !in_ctx && f & FLAG_BOUNDARY != 0 {
                return Err(TokenError::Malformed(format!("boundary marker outside context at {i}")));
            }
            let expect = in_ctx.then_some(next);
            if self.ctx_pos[i] != expect {
                return Err(TokenError::Malformed(format!("context position wrong at {i}")));
            }
            if in_ctx {
                next += 1;
            }
        }
        Ok(())
    }
}

/// Faces rebuilt from a token stream over a shared, merged vertex table.
#[derive(Clone, Debug, PartialEq)]
pub struct Detokenized {
    /// Vertices at bin centres; identical token triples share one vertex.
    pub mesh: Mesh,
    pub vertex_tokens: Vec<[Token; 3]>,
    pub context: Vec<usize>,
    pub target: Vec<usize>,
    /// Blocks that collapsed to fewer than three distinct vertices.
    pub dropped: usize,
}

/// Inverse of [`serialize_fim`] up to quantization.
pub fn detokenize(seq: &FimSequence) -> Result<Detokenized, TokenError> {
    let spec = seq.spec();
    spec.validate()?;
    let e = seq.split()?;
    let mut index: HashMap<[Token; 3], usize> = HashMap::new();
    let mut out = Detokenized {
        mesh: Mesh::default(),
        vertex_tokens: Vec::new(),
        context: Vec::new(),
        target: Vec::new(),
        dropped: 0,
    };
    for (segment, is_ctx) in [(&seq.tokens[1..e], true), (&seq.tokens[e + 1..seq.tokens.len() - 1], false)] {
        for block in segment.chunks_exact(BLOCK_LEN) {
            let mut ids = [0usize; 4];
            for s in 0..4 {
                let t = [block[3 * s], block[3 * s + 1], block[3 * s + 2]];
                ids[s] = *index.entry(t).or_insert_with(|| {
                    out.vertex_tokens.push(t);
                    out.mesh.vertices.push(spec.dequantize_point(&t));
                    out.mesh.vertices.len() - 1
                });
            }
            let face = if ids[3] == ids[2] { Face::Tri([ids[0], ids[1], ids[2]]) } else { Face::Quad(ids) };
            if face.is_degenerate() {
                out.dropped += 1;
                continue;
            }
            let fid = out.mesh.faces.len();
            out.mesh.faces.push(face);
            if is_ctx {
                out.context.push(fid);
            } else {
                out.target.push(fid);
            }
        }
    }
    Ok(out)
}

/// Adds independent `U(-delta, delta)` noise to every coordinate of every
/// vertex used by `context`, seam vertices included. Vertices are visited in
/// ascending id order so the result only depends on the seed.
pub fn augment_context(mesh: &Mesh, context: &FaceSet, delta: f64, seed: u64) -> Mesh {
    let mut out = mesh.clone();
    if delta <= 0.0 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in mesh.vertices_of(context) {
        for k in 0..3 {
            out.vertices[v][k] += rng.random_range(-delta..delta);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::boundary_vertices;
    use crate::synth;
    use crate::Point;

    fn unit_grid(n: usize) -> Mesh {
        // fits inside the quantization domain
        let mut g = synth::grid(n, n, 0.8 / n as f64);
        for p in &mut g.vertices {
            *p -= crate::Vector::new(0.4, 0.4, 0.0);
        }
        g
    }

    fn set(ids: &[usize]) -> FaceSet {
        ids.iter().copied().collect()
    }

    #[test]
    fn empty_target_layout() {
        let g = unit_grid(3);
        let ctx = set(&[0, 1, 2]);
        let seq = serialize_fim(&g, &ctx, &FaceSet::new(), &VertexSet::new(), &QuantizationSpec::default()).unwrap();
        assert_eq!(seq.len(), 3 + 12 * 3);
        assert_eq!(&seq.tokens[seq.len() - 2..], &[257, 258]);
        seq.validate().unwrap();
    }

    #[test]
    fn grid_centre_markers() {
        let g = unit_grid(3);
        let target = set(&[4]);
        let context: FaceSet = (0..9).filter(|&f| f != 4).collect();
        let boundary = boundary_vertices(&g, &target);
        let (seq, layout) =
            serialize_fim_with_layout(&g, &context, &target, &boundary, &QuantizationSpec::default()).unwrap();
        // each centre corner appears in 3 ring faces (one edge neighbour on
        // each side plus the diagonal corner face)
        let occurrences: usize = layout
            .context
            .iter()
            .map(|(_, slots)| slots.iter().filter(|v| boundary.contains(v)).count())
            .sum();
        assert_eq!(occurrences, 4 * 3);
        let marked = seq.flags.iter().filter(|&&f| f & FLAG_BOUNDARY != 0).count();
        assert_eq!(marked, 4 * 3 * 3);
    }

    #[test]
    fn two_faces_ordered_by_lowest_y() {
        let verts = vec![
            Point::new(0.0, 0.3, 0.0),
            Point::new(0.1, 0.3, 0.0),
            Point::new(0.0, 0.4, 0.0),
            Point::new(0.0, -0.3, 0.0),
            Point::new(0.1, -0.3, 0.0),
            Point::new(0.0, -0.2, 0.0),
        ];
        let mesh = Mesh::new(verts, vec![Face::Tri([1, 2, 0]), Face::Tri([3, 4, 5])]).unwrap();
        let sorted = canonical_sort(&mesh, &QuantizationSpec::default()).unwrap();
        assert_eq!(sorted.faces, vec![Face::Tri([3, 4, 5]), Face::Tri([0, 1, 2])]);
        assert_eq!(canonical_sort(&sorted, &QuantizationSpec::default()).unwrap(), sorted);
    }

    #[test]
    fn triangle_blocks_repeat_last_vertex() {
        let mesh = synth::random_mixed_mesh(80, 3);
        let all: FaceSet = (0..80).collect();
        for b in face_blocks(&mesh, &all, &QuantizationSpec::default()).unwrap() {
            if !b.is_quad {
                assert_eq!(b.tokens[9..12], b.tokens[6..9]);
            }
        }
    }

    #[test]
    fn detokenize_rejects_bad_streams() {
        let g = unit_grid(2);
        let seq = serialize_fim(&g, &set(&[0]), &set(&[1]), &VertexSet::new(), &QuantizationSpec::default()).unwrap();
        let mut no_eos = seq.clone();
        no_eos.tokens.pop();
        assert!(matches!(detokenize(&no_eos), Err(TokenError::Malformed(_))));
        let mut short = seq.clone();
        short.tokens.remove(3);
        assert!(matches!(detokenize(&short), Err(TokenError::Malformed(_))));
        let mut two_ends = seq.clone();
        two_ends.tokens[5] = 257;
        assert!(detokenize(&two_ends).is_err());
        let d = detokenize(&seq).unwrap();
        assert_eq!((d.context.len(), d.target.len()), (1, 1));
        // the two quads share an edge
        assert_eq!(d.mesh.vertices.len(), 6);
    }

    #[test]
    fn overlapping_sets_rejected() {
        let g = unit_grid(2);
        let err = serialize_fim(&g, &set(&[0, 1]), &set(&[1]), &VertexSet::new(), &QuantizationSpec::default());
        assert!(matches!(err, Err(TokenError::Overlap(1))));
    }

    #[test]
    fn augmentation_law() {
        let g = synth::grid(99, 100, 0.001);
        let all: FaceSet = (0..g.faces.len()).collect();
        assert_eq!(augment_context(&g, &all, 0.0, 1), g);
        let a = augment_context(&g, &all, 0.002, 7);
        assert_eq!(a, augment_context(&g, &all, 0.002, 7));
        let offsets: Vec<f64> = a
            .vertices
            .iter()
            .zip(&g.vertices)
            .flat_map(|(p, q)| (p - q).iter().copied().collect::<Vec<_>>())
            .collect();
        assert!(offsets.iter().all(|o| o.abs() <= 0.002));
        let mean_abs = offsets.iter().map(|o| o.abs()).sum::<f64>() / offsets.len() as f64;
        assert!((mean_abs - 0.001).abs() < 5e-5, "{mean_abs}");
    }
}
