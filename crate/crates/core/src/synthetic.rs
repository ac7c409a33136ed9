//! Small procedural scenes: meshes with full UV charts, ring camera rigs and
//! test textures. Used by the test suites and the demo scene generator.

use std::f64::consts::PI;

use nalgebra::Matrix3;

use crate::camera::CameraView;
use crate::geometry::{Corner, TriangleMesh};
use crate::retrieval::TextureAtlas;

fn corner(p: u32, t: u32, n: u32) -> Corner {
    Corner {
        position: p,
        uv: t,
        normal: n,
    }
}

/// Parallelogram spanned by `p0 -> p1` (u axis) and `p0 -> p2` (v axis),
/// mapped onto the full unit UV square.
pub fn plane_patch(p0: [f64; 3], p1: [f64; 3], p2: [f64; 3]) -> TriangleMesh {
    let p3: [f64; 3] = std::array::from_fn(|k| p1[k] + p2[k] - p0[k]);
    let e1: [f64; 3] = std::array::from_fn(|k| p1[k] - p0[k]);
    let e2: [f64; 3] = std::array::from_fn(|k| p2[k] - p0[k]);
    let n = [
        e1[1] * e2[2] - e1[2] * e2[1],
        e1[2] * e2[0] - e1[0] * e2[2],
        e1[0] * e2[1] - e1[1] * e2[0],
    ];
    TriangleMesh::new(
        vec![p0, p1, p3, p2],
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        vec![n],
        vec![
            [corner(0, 0, 0), corner(1, 1, 0), corner(2, 2, 0)],
            [corner(0, 0, 0), corner(2, 2, 0), corner(3, 3, 0)],
        ],
    )
    .expect("patch is well formed")
}

/// The unit square at z = 0 with the identity UV chart.
pub fn unit_quad() -> TriangleMesh {
    plane_patch([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
}

/// Axis-aligned quad facing +z, centered at `center`.
pub fn quad(center: [f64; 3], width: f64, height: f64) -> TriangleMesh {
    let [cx, cy, cz] = center;
    plane_patch(
        [cx - width / 2.0, cy - height / 2.0, cz],
        [cx + width / 2.0, cy - height / 2.0, cz],
        [cx - width / 2.0, cy + height / 2.0, cz],
    )
}

/// Concatenates meshes, remapping indices. UV charts are scaled into
/// horizontal strips of equal width so they do not overlap.
pub fn side_by_side_charts(meshes: &[TriangleMesh]) -> TriangleMesh {
    let n = meshes.len() as f64;
    let mut vertices = Vec::new();
    let mut uvs = Vec::new();
    let mut normals = Vec::new();
    let mut faces = Vec::new();
    for (k, m) in meshes.iter().enumerate() {
        let (vo, to, no) = (vertices.len() as u32, uvs.len() as u32, normals.len() as u32);
        vertices.extend_from_slice(&m.vertices);
        uvs.extend(m.uvs.iter().map(|uv| [(uv[0] + k as f64) / n, uv[1]]));
        normals.extend_from_slice(&m.normals);
        faces.extend(m.faces.iter().map(|f| {
            f.map(|c| Corner {
                position: c.position + vo,
                uv: c.uv + to,
                normal: c.normal + no,
            })
        }));
    }
    TriangleMesh::new(vertices, uvs, normals, faces).expect("inputs are valid meshes")
}

/// Latitude-longitude sphere with an equirectangular UV chart.
pub fn uv_sphere(radius: f64, segments: usize, rings: usize) -> TriangleMesh {
    let mut vertices = Vec::new();
    let mut uvs = Vec::new();
    let mut normals = Vec::new();
    for r in 0..=rings {
        let theta = PI * r as f64 / rings as f64;
        for s in 0..=segments {
            let phi = 2.0 * PI * s as f64 / segments as f64;
            let n = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
            vertices.push(n.map(|c| c * radius));
            normals.push(n);
            uvs.push([s as f64 / segments as f64, r as f64 / rings as f64]);
        }
    }
    let idx = |r: usize, s: usize| (r * (segments + 1) + s) as u32;
    let mut faces = Vec::new();
    for r in 0..rings {
        for s in 0..segments {
            let (a, b, c, d) = (idx(r, s), idx(r, s + 1), idx(r + 1, s + 1), idx(r + 1, s));
            if r != 0 {
                faces.push([corner(a, a, a), corner(b, b, b), corner(c, c, c)]);
            }
            if r != rings - 1 {
                faces.push([corner(a, a, a), corner(c, c, c), corner(d, d, d)]);
            }
        }
    }
    TriangleMesh::new(vertices, uvs, normals, faces).expect("sphere is well formed")
}

/// Square-pixel intrinsics with focal length `focal` and the principal
/// point at the image center.
pub fn intrinsics(focal: f64, width: usize, height: usize) -> Matrix3<f64> {
    Matrix3::new(
        focal,
        0.0,
        width as f64 / 2.0,
        0.0,
        focal,
        height as f64 / 2.0,
        0.0,
        0.0,
        1.0,
    )
}

/// `count` cameras on a cone around the +z axis through `target`, each at
/// `distance` from the target and `tilt` radians off the axis, all looking
/// at the target.
pub fn ring_cameras(
    target: [f64; 3],
    distance: f64,
    tilt: f64,
    count: usize,
    focal: f64,
    width: usize,
    height: usize,
) -> Vec<CameraView> {
    let k = intrinsics(focal, width, height);
    (0..count)
        .map(|i| {
            let az = 2.0 * PI * (i as f64 + 0.25) / count as f64;
            let eye = [
                target[0] + distance * tilt.sin() * az.cos(),
                target[1] + distance * tilt.sin() * az.sin(),
                target[2] + distance * tilt.cos(),
            ];
            CameraView::look_at(k, eye, target, [0.0, 1.0, 0.0], width, height)
        })
        .collect()
}

/// Two-color checkerboard restricted to `mask`.
pub fn checkerboard(
    width: usize,
    height: usize,
    cell: usize,
    dark: [f64; 3],
    light: [f64; 3],
    mask: &[bool],
) -> TextureAtlas {
    let rgb = (0..width * height)
        .map(|k| {
            let (i, j) = (k % width, k / width);
            if (i / cell + j / cell) % 2 == 0 {
                dark
            } else {
                light
            }
        })
        .collect();
    TextureAtlas::new(width, height, rgb, mask.to_vec())
}

/// Smooth color pattern with detail at several frequencies, restricted to
/// `mask`. Values stay inside [0.1, 0.9].
pub fn smooth_pattern(width: usize, height: usize, mask: &[bool]) -> TextureAtlas {
    let rgb = (0..width * height)
        .map(|k| {
            let u = (k % width) as f64 / width as f64;
            let v = (k / width) as f64 / height as f64;
            let a = (2.0 * PI * 3.0 * u).sin() * (2.0 * PI * 2.0 * v).cos();
            let b = (2.0 * PI * (5.0 * u + 4.0 * v)).sin();
            let c = (2.0 * PI * 7.0 * v).cos() * (2.0 * PI * u).sin();
            [
                0.5 + 0.25 * a + 0.15 * b,
                0.5 + 0.3 * c + 0.1 * a,
                0.5 + 0.2 * b - 0.2 * c,
            ]
        })
        .collect();
    TextureAtlas::new(width, height, rgb, mask.to_vec())
}
