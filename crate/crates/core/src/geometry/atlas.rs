//! Texel-center rasterization of the UV atlas.
//!
//! Texel `(i, j)` has its center at `((i + 0.5) / width, (j + 0.5) / height)`
//! in UV space and is assigned to the lowest-index face whose UV triangle
//! covers that center.

use log::warn;
use rayon::prelude::*;
use thiserror::Error;

use super::mesh::{normalize3, TriangleMesh};
use super::raster::EdgeTriangle;

/// UV triangles with area at or below this are skipped.
pub const DEGENERATE_UV_AREA: f64 = 1e-12;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AtlasError {
    #[error("atlas size must be at least 1x1, got {width}x{height}")]
    InvalidSize { width: usize, height: usize },
    #[error("no texel center falls inside any UV triangle")]
    DegenerateAtlas,
}

/// Surface record for one covered texel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TexelSample {
    pub face: u32,
    pub barycentric: [f64; 3],
    pub point: [f64; 3],
    pub normal: [f64; 3],
}

/// Texel to surface correspondence for a fixed atlas resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct TexelAtlasMap {
    width: usize,
    height: usize,
    samples: Vec<Option<TexelSample>>,
    mask: Vec<bool>,
    degenerate_faces: usize,
}

impl TexelAtlasMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn texel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn samples(&self) -> &[Option<TexelSample>] {
        &self.samples
    }

    pub fn sample(&self, i: usize, j: usize) -> Option<&TexelSample> {
        self.samples[j * self.width + i].as_ref()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn active_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Flat indices (`j * width + i`) of covered texels, ascending.
    pub fn active_indices(&self) -> Vec<u32> {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(k, &m)| m.then_some(k as u32))
            .collect()
    }

    /// Number of faces skipped because their UV triangle was degenerate.
    pub fn degenerate_faces(&self) -> usize {
        self.degenerate_faces
    }
}

/// Maps every texel center to the surface point it samples.
pub fn rasterize_atlas(
    mesh: &TriangleMesh,
    width: usize,
    height: usize,
) -> Result<TexelAtlasMap, AtlasError> {
    if width == 0 || height == 0 {
        return Err(AtlasError::InvalidSize { width, height });
    }
    let (w, h) = (width as f64, height as f64);

    let mut degenerate = 0usize;
    let mut rows: Vec<Vec<(u32, EdgeTriangle)>> = vec![Vec::new(); height];
    for face in 0..mesh.faces.len() {
        let uv = mesh.face_uvs(face);
        let pts = uv.map(|t| [t[0] * w, t[1] * h]);
        // Area threshold is in UV units, texel-space area is scaled by w*h.
        let Some(tri) = EdgeTriangle::new(pts, DEGENERATE_UV_AREA * w * h) else {
            degenerate += 1;
            continue;
        };
        let (lo, hi) = tri.bounds();
        if let Some((j0, j1)) = EdgeTriangle::sample_span(lo[1], hi[1], 0.5, height) {
            for row in &mut rows[j0..=j1] {
                row.push((face as u32, tri));
            }
        }
    }
    if degenerate > 0 {
        warn!("skipped {degenerate} faces with degenerate UV triangles");
    }

    let samples: Vec<Option<TexelSample>> = rows
        .par_iter()
        .enumerate()
        .flat_map_iter(|(j, faces)| {
            let mut row: Vec<Option<TexelSample>> = vec![None; width];
            let y = j as f64 + 0.5;
            for &(face, tri) in faces {
                let (lo, hi) = tri.bounds();
                let Some((i0, i1)) = EdgeTriangle::sample_span(lo[0], hi[0], 0.5, width) else {
                    continue;
                };
                for (i, slot) in row.iter_mut().enumerate().take(i1 + 1).skip(i0) {
                    if slot.is_some() {
                        continue;
                    }
                    if let Some(b) = tri.cover([i as f64 + 0.5, y]) {
                        *slot = Some(surface_sample(mesh, face, b));
                    }
                }
            }
            row
        })
        .collect();

    let mask: Vec<bool> = samples.iter().map(Option::is_some).collect();
    if !mask.iter().any(|&m| m) {
        return Err(AtlasError::DegenerateAtlas);
    }
    Ok(TexelAtlasMap {
        width,
        height,
        samples,
        mask,
        degenerate_faces: degenerate,
    })
}

pub(crate) fn surface_sample(mesh: &TriangleMesh, face: u32, b: [f64; 3]) -> TexelSample {
    let p = mesh.face_positions(face as usize);
    let n = mesh.face_normals(face as usize);
    let blend = |v: [[f64; 3]; 3]| -> [f64; 3] {
        std::array::from_fn(|k| b[0] * v[0][k] + b[1] * v[1][k] + b[2] * v[2][k])
    };
    let point = blend(p);
    let normal = normalize3(blend(n))
        .or_else(|| normalize3(face_normal(p)))
        .unwrap_or(n[0]);
    TexelSample {
        face,
        barycentric: b,
        point,
        normal,
    }
}

fn face_normal(p: [[f64; 3]; 3]) -> [f64; 3] {
    let e1: [f64; 3] = std::array::from_fn(|k| p[1][k] - p[0][k]);
    let e2: [f64; 3] = std::array::from_fn(|k| p[2][k] - p[0][k]);
    [
        e1[1] * e2[2] - e1[2] * e2[1],
        e1[2] * e2[0] - e1[0] * e2[2],
        e1[0] * e2[1] - e1[1] * e2[0],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::mesh::Corner;
    use crate::synthetic;

    fn corner(i: u32) -> Corner {
        Corner {
            position: i,
            uv: i,
            normal: 0,
        }
    }

    #[test]
    fn identity_chart_maps_texel_center_to_point() {
        let mesh = synthetic::unit_quad();
        let atlas = rasterize_atlas(&mesh, 4, 4).unwrap();
        // Texel (0, 2) has its center at uv (0.125, 0.625); (1, 3) at (0.375, 0.875).
        let s = atlas.sample(0, 2).unwrap();
        assert!((s.point[0] - 0.125).abs() < 1e-12 && (s.point[1] - 0.625).abs() < 1e-12);
        let atlas2 = rasterize_atlas(&mesh, 2, 2).unwrap();
        let s = atlas2.sample(0, 1).unwrap();
        assert!((s.point[0] - 0.25).abs() < 1e-12);
        assert!((s.point[1] - 0.75).abs() < 1e-12);
        assert_eq!(s.point[2], 0.0);
        assert_eq!(atlas2.active_count(), 4);
    }

    #[test]
    fn texel_outside_charts_is_masked() {
        let mesh = TriangleMesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0.0, 0.0], [0.5, 0.0], [0.0, 0.5]],
            vec![[0.0, 0.0, 1.0]],
            vec![[corner(0), corner(1), corner(2)]],
        )
        .unwrap();
        let atlas = rasterize_atlas(&mesh, 8, 8).unwrap();
        assert!(atlas.sample(7, 7).is_none());
        assert!(!atlas.mask()[63]);
        assert!(atlas.sample(0, 0).is_some());
    }

    #[test]
    fn right_triangle_count_matches_brute_force() {
        let uv = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let mesh = TriangleMesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            uv.to_vec(),
            vec![[0.0, 0.0, 1.0]],
            vec![[corner(0), corner(1), corner(2)]],
        )
        .unwrap();
        let atlas = rasterize_atlas(&mesh, 64, 64).unwrap();

        // Independent oracle: closed-form half-plane test on every center.
        // The 64 centers with u + v = 1 lie exactly on the hypotenuse, which
        // faces bottom-right and is therefore not owned by this triangle.
        let mut expected = 0;
        for j in 0..64 {
            for i in 0..64 {
                let u = (i as f64 + 0.5) / 64.0;
                let v = (j as f64 + 0.5) / 64.0;
                if u > 0.0 && v > 0.0 && u + v < 1.0 {
                    expected += 1;
                }
            }
        }
        assert_eq!(atlas.active_count(), expected);
        assert_eq!(expected, 64 * 63 / 2);
    }

    #[test]
    fn generic_triangle_count_matches_same_side_scan() {
        let uv = [[0.113, 0.071], [0.917, 0.283], [0.377, 0.949]];
        let mesh = TriangleMesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            uv.to_vec(),
            vec![[0.0, 0.0, 1.0]],
            vec![[corner(0), corner(1), corner(2)]],
        )
        .unwrap();
        let atlas = rasterize_atlas(&mesh, 64, 64).unwrap();
        let side = |a: [f64; 2], b: [f64; 2], p: [f64; 2]| {
            ((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])).signum()
        };
        let mut expected = 0;
        for j in 0..64 {
            for i in 0..64 {
                let p = [(i as f64 + 0.5) / 64.0, (j as f64 + 0.5) / 64.0];
                let s = [side(uv[0], uv[1], p), side(uv[1], uv[2], p), side(uv[2], uv[0], p)];
                if s.iter().all(|&x| x > 0.0) || s.iter().all(|&x| x < 0.0) {
                    expected += 1;
                }
            }
        }
        assert_eq!(atlas.active_count(), expected);
        assert!(expected > 1000);
    }

    #[test]
    fn zero_size_is_invalid() {
        let mesh = synthetic::unit_quad();
        assert_eq!(
            rasterize_atlas(&mesh, 0, 4),
            Err(AtlasError::InvalidSize { width: 0, height: 4 })
        );
    }

    #[test]
    fn degenerate_uv_faces_are_skipped() {
        let mesh = TriangleMesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0.1, 0.1], [0.2, 0.2], [0.3, 0.3]],
            vec![[0.0, 0.0, 1.0]],
            vec![[corner(0), corner(1), corner(2)]],
        )
        .unwrap();
        assert_eq!(rasterize_atlas(&mesh, 8, 8), Err(AtlasError::DegenerateAtlas));
    }

    #[test]
    fn overlapping_charts_resolve_to_lowest_face() {
        let mesh = TriangleMesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 5.0]],
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0.0, 0.0, 1.0]],
            vec![
                [corner(0), corner(1), corner(2)],
                [
                    Corner { position: 3, uv: 0, normal: 0 },
                    Corner { position: 1, uv: 1, normal: 0 },
                    Corner { position: 2, uv: 2, normal: 0 },
                ],
            ],
        )
        .unwrap();
        let atlas = rasterize_atlas(&mesh, 16, 16).unwrap();
        assert!(atlas.samples().iter().flatten().all(|s| s.face == 0));
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let mesh = synthetic::uv_sphere(1.0, 24, 12);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| rasterize_atlas(&mesh, 96, 48).unwrap());
        let b = many.install(|| rasterize_atlas(&mesh, 96, 48).unwrap());
        assert_eq!(a, b);
    }
}
