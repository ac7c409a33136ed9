use nalgebra::{Matrix3, Matrix3x4, Rotation3, Vector3};
use proptest::prelude::*;

use texsr::appearance_sr::{masked_weights, upsample_interp, InterpKernel};
use texsr::camera::{decompose_projection, format_camera, parse_camera, project_point, scale_camera};
use texsr::dataset::build_operators;
use texsr::geometry::rasterize_atlas;
use texsr::metrics::{masked_psnr, masked_ssim};
use texsr::synthetic::{quad, ring_cameras};
use texsr::{SparseProjectionOperator, SplatConfig, TextureAtlas};

fn scene(size: f64, tilt: f64, views: usize, atlas: usize, focal: f64) -> Vec<SparseProjectionOperator> {
    let mesh = quad([0.0; 3], size, size);
    let map = rasterize_atlas(&mesh, atlas, atlas).unwrap();
    let cams = ring_cameras([0.0; 3], 4.0, tilt, views, focal, 48, 40);
    build_operators(&mesh, &map, &cams, &SplatConfig::default()).unwrap()
}

fn unit_vec(len: usize, seed: u64) -> Vec<f64> {
    // Cheap deterministic fill in [-1, 1).
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..len)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 52) as f64 - 1.0
        })
        .collect()
}

fn projection(k: [f64; 5], axis: [f64; 3], angle: f64, t: [f64; 3], scale: f64) -> Matrix3x4<f64> {
    let kk = Matrix3::new(k[0], k[1], k[2], 0.0, k[3], k[4], 0.0, 0.0, 1.0);
    let axis = Vector3::from(axis);
    let r = if axis.norm() < 1e-3 {
        Matrix3::identity()
    } else {
        Rotation3::from_scaled_axis(axis.normalize() * angle).into_inner()
    };
    let mut rt = Matrix3x4::zeros();
    rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    rt.set_column(3, &Vector3::from(t));
    kk * rt * scale
}

fn atlas(w: usize, h: usize, rgb: Vec<[f64; 3]>, mask: Vec<bool>) -> TextureAtlas {
    TextureAtlas::new(w, h, rgb, mask)
}

fn texture_pair() -> impl Strategy<Value = (TextureAtlas, TextureAtlas)> {
    (4usize..20, 4usize..20).prop_flat_map(|(w, h)| {
        let n = w * h;
        (
            prop::collection::vec(prop::array::uniform3(0.0f64..1.0), n),
            prop::collection::vec(prop::array::uniform3(0.0f64..1.0), n),
            prop::collection::vec(prop::bool::weighted(0.85), n),
        )
            .prop_map(move |(a, b, mut m)| {
                m[0] = true;
                (atlas(w, h, a, m.clone()), atlas(w, h, b, m))
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn adjoint_identity_holds(
        size in 1.0f64..3.0,
        tilt in 0.0f64..0.8,
        views in 1usize..4,
        n in 8usize..24,
        focal in 30.0f64..90.0,
        seed in any::<u64>(),
    ) {
        for (v, op) in scene(size, tilt, views, n, focal).iter().enumerate() {
            let t = unit_vec(op.texel_count(), seed ^ v as u64);
            let y = unit_vec(op.pixel_count(), seed.rotate_left(17) ^ v as u64);
            let lhs: f64 = op.forward_channel(&t).iter().zip(&y).map(|(a, b)| a * b).sum();
            let rhs: f64 = t.iter().zip(op.adjoint_channel(&y)).map(|(a, b)| a * b).sum();
            let norm = t.iter().map(|x| x * x).sum::<f64>().sqrt() * y.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * norm);
        }
    }

    #[test]
    fn nonempty_rows_sum_to_one(
        size in 0.5f64..6.0,
        tilt in 0.0f64..1.0,
        views in 1usize..4,
        n in 4usize..32,
        focal in 20.0f64..120.0,
    ) {
        for op in scene(size, tilt, views, n, focal) {
            for p in 0..op.pixel_count() {
                if !op.row_is_empty(p) {
                    let s: f64 = op.row(p).map(|(_, w)| w).sum();
                    prop_assert!((s - 1.0).abs() <= 1e-12, "row {p} sums to {s}");
                    prop_assert!(op.row(p).all(|(_, w)| w > 0.0));
                }
            }
        }
    }

    #[test]
    fn metrics_are_symmetric((a, b) in texture_pair()) {
        let (p1, p2) = (masked_psnr(&a, &b).unwrap(), masked_psnr(&b, &a).unwrap());
        prop_assert!(p1 == p2 || (p1 - p2).abs() <= 1e-12);
        let (s1, s2) = (masked_ssim(&a, &b).unwrap(), masked_ssim(&b, &a).unwrap());
        prop_assert!((s1 - s2).abs() <= 1e-12);
        prop_assert!(s1 <= 1.0 + 1e-12);
        prop_assert!((masked_ssim(&a, &a).unwrap() - 1.0).abs() <= 1e-12);
        prop_assert!(masked_psnr(&a, &a).unwrap().is_infinite());
    }

    #[test]
    fn decomposition_recomposes_and_scaling_commutes(
        f in 50.0f64..2000.0,
        skew in -2.0f64..2.0,
        aspect in 0.8f64..1.2,
        c in prop::array::uniform2(0.0f64..800.0),
        axis in prop::array::uniform3(-1.0f64..1.0),
        angle in 0.0f64..3.1,
        t in prop::array::uniform3(-5.0f64..5.0),
        scale in prop_oneof![0.05f64..20.0, -20.0f64..-0.05],
        depth in 1.0f64..50.0,
        pix in prop::array::uniform2(0.0f64..1.0),
        s in 2u32..5,
    ) {
        let p = projection([f, skew, c[0], f * aspect, c[1]], axis, angle, t, scale);
        let cam = decompose_projection(&p, 800, 800).unwrap();
        prop_assert!(cam.k[(0, 0)] > 0.0 && cam.k[(1, 1)] > 0.0);
        prop_assert!((cam.r.determinant() - 1.0).abs() <= 1e-9);
        let lambda = p.norm() / cam.p.norm() * p.dot(&cam.p).signum();
        prop_assert!((cam.recompose() * lambda - p).norm() <= 1e-9 * p.norm());

        let ray = cam.k.try_inverse().unwrap() * Vector3::new(800.0 * pix[0], 800.0 * pix[1], 1.0) * depth;
        let x = cam.r.transpose() * (ray - cam.t);
        let x = [x[0], x[1], x[2]];
        let hr = project_point(&cam, x).unwrap();
        let lr = project_point(&scale_camera(&cam, s).unwrap(), x).unwrap();
        for k in 0..2 {
            prop_assert!((lr.pixel[k] - hr.pixel[k] / s as f64).abs() <= 1e-12 * hr.pixel[k].abs().max(1.0));
        }
    }

    #[test]
    fn camera_text_round_trips(
        f in 50.0f64..2000.0,
        axis in prop::array::uniform3(-1.0f64..1.0),
        angle in 0.0f64..3.1,
        t in prop::array::uniform3(-5.0f64..5.0),
        w in 1usize..4000,
        h in 1usize..4000,
    ) {
        let p = projection([f, 0.0, w as f64 / 2.0, f, h as f64 / 2.0], axis, angle, t, 1.0);
        let (q, qw, qh) = parse_camera(&format_camera(&p, w, h), "p.txt").unwrap();
        prop_assert_eq!((qw, qh), (w, h));
        prop_assert!((q - p).norm() <= 1e-12 * p.norm());
    }

    #[test]
    fn masked_weights_form_a_partition_of_unity(
        kernel in prop::sample::select(InterpKernel::ALL.to_vec()),
        mask in prop::collection::vec(prop::bool::weighted(0.7), 64),
        pos in prop::array::uniform2(-0.5f64..7.5),
    ) {
        let lr = atlas(8, 8, vec![[0.5; 3]; 64], mask);
        let taps = masked_weights(&lr, kernel, pos[0], pos[1]);
        if !taps.is_empty() {
            let s: f64 = taps.iter().map(|t| t.1).sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
            prop_assert!(taps.iter().all(|&(k, _)| lr.mask[k]));
        }
    }

    #[test]
    fn separable_kernels_sum_to_one(
        kernel in prop::sample::select(vec![InterpKernel::Nearest, InterpKernel::Bilinear, InterpKernel::Bicubic]),
        pos in -10.0f64..10.0,
    ) {
        let s: f64 = kernel.taps(pos).iter().map(|t| t.1).sum();
        prop_assert!((s - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn upsampling_preserves_constants(
        kernel in prop::sample::select(InterpKernel::ALL.to_vec()),
        color in prop::array::uniform3(0.0f64..1.0),
        w in 2usize..10,
        h in 2usize..10,
        s in 2u32..5,
    ) {
        let lr = atlas(w, h, vec![color; w * h], vec![true; w * h]);
        let (hw, hh) = (w * s as usize, h * s as usize);
        let up = upsample_interp(&lr, s, kernel, &vec![true; hw * hh], (hw, hh)).unwrap();
        prop_assert_eq!(up.unseen_count(), 0);
        for px in &up.texture.rgb {
            for c in 0..3 {
                prop_assert!((px[c] - color[c]).abs() <= 1e-12);
            }
        }
    }
}
