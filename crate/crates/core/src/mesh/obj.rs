use std::fmt::Write as _;
use std::path::Path;

use super::{Face, Mesh, MeshError};
use crate::Point;

/// Reads an OBJ file. Only `v` and `f` records are interpreted; texture and
/// normal references in face records (`f 1/2/3 ...`) are ignored.
pub fn load_obj(path: impl AsRef<Path>) -> Result<Mesh, MeshError> {
    let text = std::fs::read_to_string(path)?;
    parse_obj(&text)
}

pub fn parse_obj(text: &str) -> Result<Mesh, MeshError> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let mut tokens = raw.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut coords = [0.0; 3];
                for c in coords.iter_mut() {
                    let tok = tokens.next().ok_or_else(|| MeshError::Parse {
                        line,
                        message: "vertex record needs three coordinates".into(),
                    })?;
                    *c = tok.parse().map_err(|_| MeshError::Parse {
                        line,
                        message: format!("invalid coordinate {tok:?}"),
                    })?;
                }
                vertices.push(Point::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let mut idx = Vec::with_capacity(4);
                for tok in tokens {
                    let head = tok.split('/').next().unwrap_or(tok);
                    let i: i64 = head.parse().map_err(|_| MeshError::Parse {
                        line,
                        message: format!("invalid face index {tok:?}"),
                    })?;
                    let resolved = match i {
                        0 => None,
                        i if i > 0 => Some(i as usize - 1),
                        i => (vertices.len() as i64 + i).try_into().ok(),
                    };
                    idx.push(resolved.ok_or_else(|| MeshError::Parse {
                        line,
                        message: format!("face index {i} does not resolve to a vertex"),
                    })?);
                }
                if idx.len() > 4 {
                    return Err(MeshError::Arity { line, arity: idx.len() });
                }
                let face = Face::from_slice(&idx).ok_or_else(|| MeshError::Parse {
                    line,
                    message: format!("face needs 3 or 4 vertices, found {}", idx.len()),
                })?;
                if face.is_degenerate() {
                    return Err(MeshError::DegenerateFace { face: faces.len() });
                }
                faces.push(face);
            }
            _ => {}
        }
    }
    Mesh::new(vertices, faces)
}

/// Serializes to OBJ text: `v` records then `f` records, `\n` line endings,
/// coordinates printed with 9 significant digits.
pub fn write_obj(mesh: &Mesh) -> String {
    let mut out = String::with_capacity(mesh.vertices.len() * 40 + mesh.faces.len() * 24);
    for p in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", format_float(p.x), format_float(p.y), format_float(p.z));
    }
    for face in &mesh.faces {
        out.push('f');
        for &v in face.vertices() {
            let _ = write!(out, " {}", v + 1);
        }
        out.push('\n');
    }
    out
}

pub fn save_obj(path: impl AsRef<Path>, mesh: &Mesh) -> Result<(), MeshError> {
    std::fs::write(path, write_obj(mesh))?;
    Ok(())
}

/// Formats like C's `%.9g`: 9 significant digits, trailing zeros trimmed,
/// scientific notation outside `[1e-4, 1e9)`.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        return format!("{mantissa}e{exp}");
    }
    let decimals = (8 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
