//! Calibrated pinhole views.
//!
//! A [`CameraView`] keeps the 3x4 projection matrix together with its
//! factorization `P = K [R | t]`, normalized so that `K[2][2] = 1`. With that
//! normalization the third homogeneous coordinate of a projected point is its
//! camera-space depth.
//!
//! Pixel `(i, j)` covers `[i, i + 1) x [j, j + 1)` in continuous image
//! coordinates, so its center is `(i + 0.5, j + 0.5)`. Under this convention
//! dividing the first two rows of `K` by `s` maps each block of `s x s`
//! pixels onto one pixel of the down-scaled image.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use nalgebra::{Matrix3, Matrix3x4, Vector3, Vector4};
use thiserror::Error;

/// Smallest depth a projected point may have and still count as in front.
pub const MIN_DEPTH: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CameraError {
    #[error("left 3x3 block of the projection matrix is singular")]
    SingularMatrix,
    #[error("scale factor must be at least 1, got {0}")]
    InvalidFactor(u32),
    #[error("point is behind the camera (depth {0})")]
    BehindCamera(f64),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraView {
    /// Normalized projection matrix, equal to `k * [r | t]`.
    pub p: Matrix3x4<f64>,
    /// Upper-triangular intrinsics with positive diagonal and `k[(2, 2)] == 1`.
    pub k: Matrix3<f64>,
    pub r: Matrix3<f64>,
    pub t: Vector3<f64>,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelProjection {
    pub pixel: [f64; 2],
    pub depth: f64,
}

/// RQ factorization of a 3x3 matrix: `m = upper * orthogonal`.
///
/// The diagonal of the triangular factor is made non-negative by moving
/// signs into the orthogonal factor.
pub fn rq3(m: &Matrix3<f64>) -> (Matrix3<f64>, Matrix3<f64>) {
    // Reverse-permutation trick: QR of the flipped transpose is RQ of `m`.
    let flip = Matrix3::new(0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0);
    let qr = (flip * m.transpose() * flip).qr();
    let mut upper = flip * qr.r().transpose() * flip;
    let mut orth = flip * qr.q().transpose() * flip;
    for i in 0..3 {
        if upper[(i, i)] < 0.0 {
            for row in 0..3 {
                upper[(row, i)] = -upper[(row, i)];
            }
            for col in 0..3 {
                orth[(i, col)] = -orth[(i, col)];
            }
        }
    }
    (upper, orth)
}

/// Factors a projection matrix into intrinsics, rotation and translation.
///
/// Sign ambiguities are resolved so that `K` has a positive diagonal and
/// `det(R) = +1`. When the left block of `P` has negative determinant, the
/// stored matrix is `P` divided by a negative scalar.
pub fn decompose_projection(
    p: &Matrix3x4<f64>,
    width: usize,
    height: usize,
) -> Result<CameraView, CameraError> {
    let m: Matrix3<f64> = p.fixed_view::<3, 3>(0, 0).into_owned();
    let norm = m.norm();
    let det = m.determinant();
    if !det.is_finite() || norm == 0.0 || det.abs() < 1e-12 * norm * norm * norm {
        return Err(CameraError::SingularMatrix);
    }

    let (upper, mut r) = rq3(&m);
    let mut scale = upper[(2, 2)];
    if r.determinant() < 0.0 {
        r = -r;
        scale = -scale;
    }
    let mut k = upper / upper[(2, 2)];
    k[(1, 0)] = 0.0;
    k[(2, 0)] = 0.0;
    k[(2, 1)] = 0.0;
    k[(2, 2)] = 1.0;

    let p_norm = p / scale;
    let k_inv = k.try_inverse().ok_or(CameraError::SingularMatrix)?;
    let t = k_inv * p_norm.column(3);
    Ok(CameraView {
        p: p_norm,
        k,
        r,
        t,
        width,
        height,
    })
}

/// Derives the view for images down-scaled by an integer factor.
///
/// The first two rows of `K` and `P` are divided by the factor and the image
/// size is floor-divided; pose is unchanged.
pub fn scale_camera(cam: &CameraView, factor: u32) -> Result<CameraView, CameraError> {
    if factor < 1 {
        return Err(CameraError::InvalidFactor(factor));
    }
    if factor == 1 {
        return Ok(cam.clone());
    }
    let s = factor as f64;
    let mut k = cam.k;
    let mut p = cam.p;
    for row in 0..2 {
        for col in 0..3 {
            k[(row, col)] /= s;
        }
        for col in 0..4 {
            p[(row, col)] /= s;
        }
    }
    Ok(CameraView {
        p,
        k,
        r: cam.r,
        t: cam.t,
        width: cam.width / factor as usize,
        height: cam.height / factor as usize,
    })
}

/// Projects a world point to continuous pixel coordinates.
pub fn project_point(cam: &CameraView, x: [f64; 3]) -> Result<PixelProjection, CameraError> {
    let h = cam.p * Vector4::new(x[0], x[1], x[2], 1.0);
    let depth = h[2];
    if !(depth > MIN_DEPTH) {
        return Err(CameraError::BehindCamera(depth));
    }
    Ok(PixelProjection {
        pixel: [h[0] / depth, h[1] / depth],
        depth,
    })
}

impl CameraView {
    /// Assembles a view from known factors. `k` is rescaled so `k[(2, 2)] = 1`.
    pub fn from_parts(
        k: Matrix3<f64>,
        r: Matrix3<f64>,
        t: Vector3<f64>,
        width: usize,
        height: usize,
    ) -> Self {
        let k = k / k[(2, 2)];
        let mut rt = Matrix3x4::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
        rt.set_column(3, &t);
        Self {
            p: k * rt,
            k,
            r,
            t,
            width,
            height,
        }
    }

    /// Camera at `eye` looking at `target`. Image x runs along the camera's
    /// right vector and image y along its down vector.
    pub fn look_at(
        k: Matrix3<f64>,
        eye: [f64; 3],
        target: [f64; 3],
        up: [f64; 3],
        width: usize,
        height: usize,
    ) -> Self {
        let eye = Vector3::from(eye);
        let forward = (Vector3::from(target) - eye).normalize();
        let right = forward.cross(&Vector3::from(up)).normalize();
        let down = forward.cross(&right);
        let r = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let t = -(r * eye);
        Self::from_parts(k, r, t, width, height)
    }

    /// Pinhole intrinsics from a physical lens and sensor, square pixels,
    /// with the sensor width mapped onto the image width and the principal
    /// point at the image center.
    pub fn sensor_intrinsics(
        focal_mm: f64,
        sensor_width_mm: f64,
        width: usize,
        height: usize,
    ) -> Matrix3<f64> {
        let f = focal_mm / sensor_width_mm * width as f64;
        Matrix3::new(
            f,
            0.0,
            width as f64 / 2.0,
            0.0,
            f,
            height as f64 / 2.0,
            0.0,
            0.0,
            1.0,
        )
    }

    /// `K [R | t]` recomposed from the stored factors.
    pub fn recompose(&self) -> Matrix3x4<f64> {
        let mut rt = Matrix3x4::zeros();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.r);
        rt.set_column(3, &self.t);
        self.k * rt
    }

    pub fn center(&self) -> Vector3<f64> {
        -(self.r.transpose() * self.t)
    }

    /// Camera-space position of a world point.
    pub fn to_camera(&self, x: [f64; 3]) -> Vector3<f64> {
        self.r * Vector3::from(x) + self.t
    }
}

/// Serializes a projection matrix and image size in the camera text format:
/// three rows of four reals with 17 significant digits, then `width height`.
pub fn format_camera(p: &Matrix3x4<f64>, width: usize, height: usize) -> String {
    let mut out = String::new();
    for row in 0..3 {
        let cells: Vec<String> = (0..4).map(|c| format!("{:.16e}", p[(row, c)])).collect();
        let _ = writeln!(out, "{}", cells.join(" "));
    }
    let _ = writeln!(out, "{width} {height}");
    out
}

pub fn parse_camera(text: &str, path: &str) -> Result<(Matrix3x4<f64>, usize, usize), CameraError> {
    let err = |line: usize, message: String| CameraError::Parse {
        path: path.to_string(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let mut p = Matrix3x4::zeros();
    for row in 0..3 {
        let (n, line) = lines
            .next()
            .ok_or_else(|| err(row + 1, "expected a matrix row".into()))?;
        let vals: Vec<&str> = line.split_whitespace().collect();
        if vals.len() != 4 {
            return Err(err(n + 1, format!("expected 4 values, found {}", vals.len())));
        }
        for (c, v) in vals.iter().enumerate() {
            p[(row, c)] = v
                .parse::<f64>()
                .map_err(|_| err(n + 1, format!("invalid number {v:?}")))?;
        }
    }
    let (n, line) = lines
        .next()
        .ok_or_else(|| err(4, "expected \"width height\"".into()))?;
    let dims: Vec<&str> = line.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(err(n + 1, "expected \"width height\"".into()));
    }
    let parse_dim = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| err(n + 1, format!("invalid image dimension {s:?}")))
    };
    let (w, h) = (parse_dim(dims[0])?, parse_dim(dims[1])?);
    if let Some((n, _)) = lines.next() {
        return Err(err(n + 1, "unexpected trailing content".into()));
    }
    Ok((p, w, h))
}

pub fn write_camera_file(path: &Path, cam: &CameraView) -> Result<(), CameraError> {
    fs::write(path, format_camera(&cam.p, cam.width, cam.height)).map_err(|source| {
        CameraError::Io {
            path: path.display().to_string(),
            source,
        }
    })
}

/// Reads a camera file and factors its matrix.
pub fn read_camera_file(path: &Path) -> Result<CameraView, CameraError> {
    let text = fs::read_to_string(path).map_err(|source| CameraError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let (p, w, h) = parse_camera(&text, &path.display().to_string())?;
    decompose_projection(&p, w, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn max_abs(m: &Matrix3x4<f64>) -> f64 {
        m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    #[test]
    fn identity_projection() {
        let cam = decompose_projection(&Matrix3x4::identity(), 10, 10).unwrap();
        assert!((cam.k - Matrix3::identity()).norm() < 1e-15);
        assert!((cam.r - Matrix3::identity()).norm() < 1e-15);
        assert!(cam.t.norm() < 1e-15);
    }

    #[test]
    fn random_cameras_recompose() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let k = Matrix3::new(
                rng.random_range(100.0..3000.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(0.0..2000.0),
                0.0,
                rng.random_range(100.0..3000.0),
                rng.random_range(0.0..2000.0),
                0.0,
                0.0,
                1.0,
            );
            let r = *Rotation3::from_euler_angles(
                rng.random_range(-3.1..3.1),
                rng.random_range(-1.5..1.5),
                rng.random_range(-3.1..3.1),
            )
            .matrix();
            let t = Vector3::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            );
            let truth = CameraView::from_parts(k, r, t, 640, 480);
            let cam = decompose_projection(&(truth.p * 3.5), 640, 480).unwrap();
            assert!(max_abs(&(cam.recompose() - truth.p)) <= 1e-9 * max_abs(&truth.p));
            assert!((cam.r * cam.r.transpose() - Matrix3::identity()).norm() < 1e-9);
            assert!((cam.r.determinant() - 1.0).abs() < 1e-9);
            assert!((cam.k - k).norm() <= 1e-9 * k.norm());
        }
    }

    #[test]
    fn negative_determinant_flips_scale_not_rotation() {
        let truth = CameraView::from_parts(
            Matrix3::new(500.0, 0.0, 320.0, 0.0, 400.0, 240.0, 0.0, 0.0, 1.0),
            *Rotation3::from_euler_angles(0.2, -0.1, 0.3).matrix(),
            Vector3::new(0.1, 0.2, 3.0),
            640,
            480,
        );
        let cam = decompose_projection(&(truth.p * -2.0), 640, 480).unwrap();
        assert!(cam.k[(0, 0)] > 0.0 && cam.k[(1, 1)] > 0.0);
        assert!((cam.r.determinant() - 1.0).abs() < 1e-12);
        assert!(max_abs(&(cam.p - truth.p)) < 1e-9);
        let pt = project_point(&cam, [0.0, 0.0, 0.0]).unwrap();
        assert!((pt.depth - 3.0).abs() < 1e-12);
    }

    #[test]
    fn negative_diagonal_from_rq_is_absorbed() {
        // A mirrored intrinsic (negative fy) times a rotation: the factor must
        // come back with a positive diagonal and a proper rotation.
        let k = Matrix3::new(800.0, 0.0, 320.0, 0.0, -600.0, 240.0, 0.0, 0.0, 1.0);
        let r = *Rotation3::from_euler_angles(0.3, 0.2, 0.1).matrix();
        let mut p = Matrix3x4::zeros();
        p.fixed_view_mut::<3, 3>(0, 0).copy_from(&(k * r));
        let cam = decompose_projection(&p, 640, 480).unwrap();
        assert!(cam.k.diagonal().iter().all(|&d| d > 0.0));
        assert!((cam.r.determinant() - 1.0).abs() < 1e-12);
        let back = cam.recompose();
        let ratio = p[(0, 0)] / back[(0, 0)];
        assert!(max_abs(&(back * ratio - p)) < 1e-9 * max_abs(&p));
    }

    #[test]
    fn singular_block_is_rejected() {
        let mut p = Matrix3x4::identity();
        p[(2, 2)] = 0.0;
        assert!(matches!(
            decompose_projection(&p, 1, 1),
            Err(CameraError::SingularMatrix)
        ));
    }

    #[test]
    fn scale_factor_two_halves_intrinsics() {
        let k = Matrix3::new(1000.0, 0.0, 500.0, 0.0, 1000.0, 300.0, 0.0, 0.0, 1.0);
        let cam = CameraView::from_parts(k, Matrix3::identity(), Vector3::zeros(), 1001, 601);
        let lr = scale_camera(&cam, 2).unwrap();
        assert_eq!(lr.k[(0, 0)], 500.0);
        assert_eq!(lr.k[(1, 1)], 500.0);
        assert_eq!(lr.k[(0, 2)], 250.0);
        assert_eq!(lr.k[(1, 2)], 150.0);
        assert_eq!((lr.width, lr.height), (500, 300));
        assert_eq!(lr.r, cam.r);
        assert_eq!(lr.t, cam.t);
        assert!(max_abs(&(lr.recompose() - lr.p)) < 1e-12);
    }

    #[test]
    fn scale_factor_one_is_identity_and_zero_is_invalid() {
        let cam = decompose_projection(&Matrix3x4::identity(), 7, 5).unwrap();
        assert_eq!(scale_camera(&cam, 1).unwrap(), cam);
        assert!(matches!(scale_camera(&cam, 0), Err(CameraError::InvalidFactor(0))));
    }

    #[test]
    fn optical_axis_and_behind_camera() {
        let cam = decompose_projection(&Matrix3x4::identity(), 1, 1).unwrap();
        let p = project_point(&cam, [0.0, 0.0, 5.0]).unwrap();
        assert_eq!(p.pixel, [0.0, 0.0]);
        assert_eq!(p.depth, 5.0);
        assert!(matches!(
            project_point(&cam, [0.0, 0.0, -1.0]),
            Err(CameraError::BehindCamera(_))
        ));
        assert!(project_point(&cam, [1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn sensor_camera_offset() {
        // 25 mm lens on a 32 mm wide sensor imaged at 3888 px.
        let k = CameraView::sensor_intrinsics(25.0, 32.0, 3888, 2592);
        assert_eq!(k[(0, 0)], 3037.5);
        let cam = CameraView::from_parts(k, Matrix3::identity(), Vector3::zeros(), 3888, 2592);
        let on_axis = project_point(&cam, [0.0, 0.0, 1000.0]).unwrap();
        let off_axis = project_point(&cam, [10.0, 0.0, 1000.0]).unwrap();
        assert!((off_axis.pixel[0] - on_axis.pixel[0] - 30.375).abs() < 1e-9);
    }

    #[test]
    fn camera_file_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = Matrix3x4::from_fn(|_, _| rng.random_range(-1e3..1e3) / 7.0);
        let text = format_camera(&p, 3888, 2592);
        let (back, w, h) = parse_camera(&text, "mem").unwrap();
        assert_eq!((w, h), (3888, 2592));
        for (a, b) in p.iter().zip(back.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn camera_file_errors_carry_line() {
        let bad = "1 0 0 0\n0 1 0\n0 0 1 0\n4 4\n";
        match parse_camera(bad, "x") {
            Err(CameraError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn look_at_sees_target_on_axis() {
        let k = Matrix3::new(100.0, 0.0, 50.0, 0.0, 100.0, 40.0, 0.0, 0.0, 1.0);
        let cam = CameraView::look_at(k, [1.0, 2.0, 5.0], [0.0, 0.0, 0.0], [0.0, 1.0, 0.0], 101, 81);
        let p = project_point(&cam, [0.0, 0.0, 0.0]).unwrap();
        assert!((p.pixel[0] - 50.0).abs() < 1e-12 && (p.pixel[1] - 40.0).abs() < 1e-12);
        assert!((p.depth - 30f64.sqrt()).abs() < 1e-12);
        assert!((cam.r.determinant() - 1.0).abs() < 1e-12);
    }
}
