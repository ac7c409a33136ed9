//! UV-parameterized triangle meshes and a Wavefront OBJ reader.
//!
//! Only the subset needed for texture work is understood: `v`, `vt`, `vn`
//! and `f` records whose corners carry all three indices. Materials, groups,
//! smoothing groups and comments are skipped.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

/// Errors raised while reading or validating a mesh.
#[derive(Debug, Error)]
pub enum MeshError {
    #[error("mesh file not found: {0}")]
    FileNotFound(String),
    #[error("failed to read mesh: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: face corner {corner} lacks a {attribute} index")]
    MissingAttribute {
        line: usize,
        corner: usize,
        attribute: &'static str,
    },
    #[error("mesh has no faces")]
    EmptyMesh,
    #[error("line {line}: normal has zero length")]
    ZeroNormal { line: usize },
}

/// One face corner: indices into the position, uv and normal arrays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Corner {
    pub position: u32,
    pub uv: u32,
    pub normal: u32,
}

/// Triangle mesh with per-corner texture coordinates and normals.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<[f64; 3]>,
    pub uvs: Vec<[f64; 2]>,
    pub normals: Vec<[f64; 3]>,
    pub faces: Vec<[Corner; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeshStats {
    pub vertices: usize,
    pub uvs: usize,
    pub normals: usize,
    pub faces: usize,
}

impl TriangleMesh {
    /// Builds a mesh from raw arrays, checking index ranges and renormalizing
    /// normals.
    pub fn new(
        vertices: Vec<[f64; 3]>,
        uvs: Vec<[f64; 2]>,
        normals: Vec<[f64; 3]>,
        faces: Vec<[Corner; 3]>,
    ) -> Result<Self, MeshError> {
        if faces.is_empty() {
            return Err(MeshError::EmptyMesh);
        }
        let mut normals = normals;
        for (i, n) in normals.iter_mut().enumerate() {
            *n = normalize3(*n).ok_or(MeshError::ZeroNormal { line: i + 1 })?;
        }
        for (f, face) in faces.iter().enumerate() {
            for c in face {
                if c.position as usize >= vertices.len()
                    || c.uv as usize >= uvs.len()
                    || c.normal as usize >= normals.len()
                {
                    return Err(MeshError::Parse {
                        line: 0,
                        message: format!("face {f} has an out-of-range index"),
                    });
                }
            }
        }
        Ok(Self {
            vertices,
            uvs,
            normals,
            faces,
        })
    }

    pub fn stats(&self) -> MeshStats {
        MeshStats {
            vertices: self.vertices.len(),
            uvs: self.uvs.len(),
            normals: self.normals.len(),
            faces: self.faces.len(),
        }
    }

    pub fn face_positions(&self, face: usize) -> [[f64; 3]; 3] {
        let f = &self.faces[face];
        [
            self.vertices[f[0].position as usize],
            self.vertices[f[1].position as usize],
            self.vertices[f[2].position as usize],
        ]
    }

    pub fn face_uvs(&self, face: usize) -> [[f64; 2]; 3] {
        let f = &self.faces[face];
        [
            self.uvs[f[0].uv as usize],
            self.uvs[f[1].uv as usize],
            self.uvs[f[2].uv as usize],
        ]
    }

    pub fn face_normals(&self, face: usize) -> [[f64; 3]; 3] {
        let f = &self.faces[face];
        [
            self.normals[f[0].normal as usize],
            self.normals[f[1].normal as usize],
            self.normals[f[2].normal as usize],
        ]
    }

    /// Serializes the mesh as OBJ text with full `v/vt/vn` corners.
    pub fn to_obj_string(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "v {:?} {:?} {:?}", v[0], v[1], v[2]);
        }
        for t in &self.uvs {
            let _ = writeln!(out, "vt {:?} {:?}", t[0], t[1]);
        }
        for n in &self.normals {
            let _ = writeln!(out, "vn {:?} {:?} {:?}", n[0], n[1], n[2]);
        }
        for f in &self.faces {
            out.push('f');
            for c in f {
                let _ = write!(out, " {}/{}/{}", c.position + 1, c.uv + 1, c.normal + 1);
            }
            out.push('\n');
        }
        out
    }
}

pub(crate) fn normalize3(v: [f64; 3]) -> Option<[f64; 3]> {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if n > 0.0 && n.is_finite() {
        Some([v[0] / n, v[1] / n, v[2] / n])
    } else {
        None
    }
}

/// Reads an OBJ file from disk.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh, MeshError> {
    let path = path.as_ref();
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            return Err(MeshError::FileNotFound(path.display().to_string()))
        }
        Err(e) => return Err(e.into()),
    };
    parse_obj(&text)
}

/// Parses OBJ text. Polygons with more than three corners are fan-triangulated.
pub fn parse_obj(text: &str) -> Result<TriangleMesh, MeshError> {
    let mut vertices = Vec::new();
    let mut uvs = Vec::new();
    let mut normals: Vec<[f64; 3]> = Vec::new();
    let mut faces = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let keyword = parts.next().unwrap_or("");
        match keyword {
            "v" => vertices.push(parse_floats::<3>(&mut parts, line_no, 3)?),
            "vt" => uvs.push(parse_floats::<2>(&mut parts, line_no, 2)?),
            "vn" => {
                let n = parse_floats::<3>(&mut parts, line_no, 3)?;
                normals.push(normalize3(n).ok_or(MeshError::ZeroNormal { line: line_no })?);
            }
            "f" => {
                let mut corners = Vec::with_capacity(4);
                for (k, token) in parts.enumerate() {
                    corners.push(parse_corner(
                        token,
                        k,
                        line_no,
                        [vertices.len(), uvs.len(), normals.len()],
                    )?);
                }
                if corners.len() < 3 {
                    return Err(MeshError::Parse {
                        line: line_no,
                        message: format!("face has {} corners, need at least 3", corners.len()),
                    });
                }
                for k in 1..corners.len() - 1 {
                    faces.push([corners[0], corners[k], corners[k + 1]]);
                }
            }
            _ => {}
        }
    }

    if faces.is_empty() {
        return Err(MeshError::EmptyMesh);
    }
    Ok(TriangleMesh {
        vertices,
        uvs,
        normals,
        faces,
    })
}

fn parse_floats<'a, const N: usize>(
    parts: &mut impl Iterator<Item = &'a str>,
    line: usize,
    required: usize,
) -> Result<[f64; N], MeshError> {
    let mut out = [0.0; N];
    for (i, slot) in out.iter_mut().enumerate() {
        let token = parts.next().ok_or_else(|| MeshError::Parse {
            line,
            message: format!("expected {required} coordinates, found {i}"),
        })?;
        *slot = token.parse::<f64>().map_err(|_| MeshError::Parse {
            line,
            message: format!("invalid number {token:?}"),
        })?;
        if !slot.is_finite() {
            return Err(MeshError::Parse {
                line,
                message: format!("non-finite number {token:?}"),
            });
        }
    }
    // `vt` may carry an optional w, `v` an optional weight; both are ignored.
    Ok(out)
}

fn parse_corner(
    token: &str,
    corner: usize,
    line: usize,
    counts: [usize; 3],
) -> Result<Corner, MeshError> {
    const NAMES: [&str; 3] = ["position", "texture coordinate", "normal"];
    let mut fields = token.split('/');
    let mut resolved = [0u32; 3];
    for (slot, name) in NAMES.iter().enumerate() {
        let field = fields.next().unwrap_or("");
        if field.is_empty() {
            return Err(MeshError::MissingAttribute {
                line,
                corner,
                attribute: name,
            });
        }
        let raw: i64 = field.parse().map_err(|_| MeshError::Parse {
            line,
            message: format!("invalid index {field:?}"),
        })?;
        let count = counts[slot] as i64;
        // OBJ indices are 1-based; negative values count back from the end.
        let zero_based = if raw > 0 { raw - 1 } else { count + raw };
        if raw == 0 || zero_based < 0 || zero_based >= count {
            return Err(MeshError::Parse {
                line,
                message: format!("{name} index {raw} out of range (have {count})"),
            });
        }
        resolved[slot] = zero_based as u32;
    }
    if fields.next().is_some() {
        return Err(MeshError::Parse {
            line,
            message: format!("malformed face corner {token:?}"),
        });
    }
    Ok(Corner {
        position: resolved[0],
        uv: resolved[1],
        normal: resolved[2],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRI: &str = "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\nvn 0 0 2\nf 1/1/1 2/2/1 3/3/1\n";

    #[test]
    fn single_triangle() {
        let m = parse_obj(TRI).unwrap();
        assert_eq!(m.vertices.len(), 3);
        assert_eq!(m.faces.len(), 1);
        assert_eq!(m.normals[0], [0.0, 0.0, 1.0]);
    }

    #[test]
    fn position_only_face_is_missing_attribute() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n";
        assert!(matches!(
            parse_obj(text),
            Err(MeshError::MissingAttribute { line: 4, attribute: "texture coordinate", .. })
        ));
    }

    #[test]
    fn missing_uv_with_normal_is_missing_attribute() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1\n";
        assert!(matches!(
            parse_obj(text),
            Err(MeshError::MissingAttribute { attribute: "texture coordinate", .. })
        ));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = "v 0 0 0\nv 1 zero 0\n";
        match parse_obj(text) {
            Err(MeshError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn no_faces_is_empty_mesh() {
        assert!(matches!(parse_obj("v 0 0 0\n"), Err(MeshError::EmptyMesh)));
    }

    #[test]
    fn quad_is_fan_triangulated_and_negative_indices_resolve() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 1 1\nvt 0 1\nvn 0 0 1\n\
                    usemtl foo\ng bar\ns off\nf -4/-4/-1 -3/-3/-1 -2/-2/-1 -1/-1/-1\n";
        let m = parse_obj(text).unwrap();
        assert_eq!(m.faces.len(), 2);
        assert_eq!(m.faces[1][2].position, 3);
    }

    #[test]
    fn out_of_range_index_is_parse_error() {
        let text = "v 0 0 0\nvt 0 0\nvn 0 0 1\nf 1/1/1 2/1/1 1/1/1\n";
        assert!(matches!(parse_obj(text), Err(MeshError::Parse { line: 4, .. })));
    }

    #[test]
    fn zero_normal_is_rejected() {
        let text = "v 0 0 0\nvn 0 0 0\n";
        assert!(matches!(parse_obj(text), Err(MeshError::ZeroNormal { line: 2 })));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_mesh("/nonexistent/mesh.obj"),
            Err(MeshError::FileNotFound(_))
        ));
    }

    #[test]
    fn obj_text_round_trips() {
        let m = parse_obj(TRI).unwrap();
        let again = parse_obj(&m.to_obj_string()).unwrap();
        assert_eq!(m, again);
        assert_eq!(again.stats().faces, 1);
    }
}
