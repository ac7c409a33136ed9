//! Per-pixel nearest-surface depth for one view.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::camera::CameraView;
use crate::geometry::raster::EdgeTriangle;
use crate::geometry::TriangleMesh;

/// Camera-space near plane used when clipping triangles.
const NEAR: f64 = 1e-6;

/// Rasterizes every mesh triangle into a depth buffer at the view resolution,
/// sampling at pixel centers `(i + 0.5, j + 0.5)`.
///
/// Depth is camera-space z, interpolated perspective-correctly (linear in
/// 1/z). Pixels not covered by any triangle hold `f64::INFINITY`.
pub fn depth_buffer(mesh: &TriangleMesh, cam: &CameraView) -> Vec<f64> {
    let (w, h) = (cam.width, cam.height);
    if w == 0 || h == 0 {
        return Vec::new();
    }

    // Screen-space triangles with per-corner inverse depth, bucketed by row.
    let mut rows: Vec<Vec<(EdgeTriangle, [f64; 3])>> = vec![Vec::new(); h];
    for face in 0..mesh.faces.len() {
        let cam_pts = mesh.face_positions(face).map(|x| cam.to_camera(x));
        for tri in clip_near(&cam_pts) {
            let screen = tri.map(|c| {
                let q = cam.k * c;
                [q[0] / c[2], q[1] / c[2]]
            });
            let inv_z = tri.map(|c| 1.0 / c[2]);
            let Some(et) = EdgeTriangle::new(screen, 0.0) else {
                continue;
            };
            let (lo, hi) = et.bounds();
            if let Some((j0, j1)) = EdgeTriangle::sample_span(lo[1], hi[1], 0.5, h) {
                for row in &mut rows[j0..=j1] {
                    row.push((et, inv_z));
                }
            }
        }
    }

    rows.par_iter()
        .enumerate()
        .flat_map_iter(|(j, tris)| {
            let mut row = vec![f64::INFINITY; w];
            for (et, inv_z) in tris {
                let (lo, hi) = et.bounds();
                let Some((i0, i1)) = EdgeTriangle::sample_span(lo[0], hi[0], 0.5, w) else {
                    continue;
                };
                for (i, slot) in row.iter_mut().enumerate().take(i1 + 1).skip(i0) {
                    if let Some(b) = et.cover([i as f64 + 0.5, j as f64 + 0.5]) {
                        let z = 1.0 / (b[0] * inv_z[0] + b[1] * inv_z[1] + b[2] * inv_z[2]);
                        if z < *slot {
                            *slot = z;
                        }
                    }
                }
            }
            row
        })
        .collect()
}

/// Clips a camera-space triangle against `z >= NEAR`, returning 0 to 2
/// triangles.
fn clip_near(tri: &[Vector3<f64>; 3]) -> Vec<[Vector3<f64>; 3]> {
    if tri.iter().all(|c| c[2] >= NEAR) {
        return vec![*tri];
    }
    let mut poly: Vec<Vector3<f64>> = Vec::with_capacity(4);
    for k in 0..3 {
        let a = tri[k];
        let b = tri[(k + 1) % 3];
        let a_in = a[2] >= NEAR;
        let b_in = b[2] >= NEAR;
        if a_in {
            poly.push(a);
        }
        if a_in != b_in {
            let s = (NEAR - a[2]) / (b[2] - a[2]);
            let mut p = a + (b - a) * s;
            p[2] = NEAR;
            poly.push(p);
        }
    }
    (1..poly.len().saturating_sub(1))
        .map(|k| [poly[0], poly[k], poly[k + 1]])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;
    use nalgebra::Matrix3;

    #[test]
    fn fronto_parallel_quad_has_constant_depth() {
        let mesh = synthetic::quad([0.0, 0.0, 0.0], 2.0, 2.0);
        let k = Matrix3::new(40.0, 0.0, 31.5, 0.0, 40.0, 23.5, 0.0, 0.0, 1.0);
        let cam = CameraView::look_at(k, [0.0, 0.0, 4.0], [0.0; 3], [0.0, 1.0, 0.0], 64, 48);
        let z = depth_buffer(&mesh, &cam);
        let center = z[24 * 64 + 32];
        assert!((center - 4.0).abs() < 1e-12);
        // Quad spans 40 * 2 / 4 = 20 px around the center; corners are empty.
        assert!(z[0].is_infinite());
        let covered = z.iter().filter(|d| d.is_finite()).count();
        assert!((380..=460).contains(&covered), "{covered}");
    }

    #[test]
    fn tilted_plane_depth_is_perspective_correct() {
        // Plane z = 5 + 0.5 x seen from the origin; compare against the
        // ray-plane intersection at each pixel center.
        let mesh = synthetic::plane_patch([-2.0, -2.0, 4.0], [2.0, -2.0, 6.0], [-2.0, 2.0, 4.0]);
        let k = Matrix3::new(20.0, 0.0, 20.0, 0.0, 20.0, 20.0, 0.0, 0.0, 1.0);
        let cam = CameraView::from_parts(k, Matrix3::identity(), Vector3::zeros(), 41, 41);
        let z = depth_buffer(&mesh, &cam);
        let mut checked = 0;
        for j in 0..41 {
            for i in 0..41 {
                let d = z[j * 41 + i];
                if !d.is_finite() {
                    continue;
                }
                let rx = (i as f64 + 0.5 - 20.0) / 20.0;
                // z = 5 + 0.5 * x and x = rx * z
                let expect = 5.0 / (1.0 - 0.5 * rx);
                assert!((d - expect).abs() < 1e-9, "({i},{j}) {d} vs {expect}");
                checked += 1;
            }
        }
        assert!(checked > 200, "{checked}");
    }

    #[test]
    fn near_clipping_keeps_front_part() {
        let tri = [
            Vector3::new(0.0, 0.0, -1.0),
            Vector3::new(1.0, 0.0, 1.0),
            Vector3::new(0.0, 1.0, 1.0),
        ];
        let out = clip_near(&tri);
        assert_eq!(out.len(), 2);
        assert!(out.iter().flatten().all(|c| c[2] >= NEAR));
        assert!(clip_near(&tri.map(|c| Vector3::new(c[0], c[1], -2.0))).is_empty());
    }
}
