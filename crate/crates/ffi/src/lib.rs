//! C interface to texsr.
//!
//! Objects are opaque handles created by `texsr_*_new`/`_load` functions and
//! released with the matching `_free`. Every fallible call returns a
//! [`TexsrStatus`]; on failure `texsr_last_error` describes the error for
//! the calling thread. Colors are interleaved RGB doubles in [0, 1], row-major,
//! and masks are one byte per texel (nonzero = active).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use nalgebra::Matrix3x4;
use texsr::appearance_sr::{upsample_interp, InterpKernel};
use texsr::camera::{decompose_projection, project_point, read_camera_file};
use texsr::formation::{apply_adjoint, apply_forward, build_operator};
use texsr::geometry::{load_mesh, rasterize_atlas};
use texsr::io::{read_texture, write_texture, TextureDepth};
use texsr::metrics::{masked_psnr, masked_ssim};
use texsr::retrieval::{retrieve_backprojection, retrieve_least_squares, RetrievalConfig, RetrievalMode};
use texsr::{CameraView, SparseProjectionOperator, SplatConfig, TexelAtlasMap, TextureAtlas, TriangleMesh, ViewImage};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TexsrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Geometry = 4,
    Numerical = 5,
    Panic = 6,
}

/// Interpolation kernels for [`texsr_upsample`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TexsrKernel {
    Nearest = 0,
    Bilinear = 1,
    Bicubic = 2,
    Lanczos = 3,
}

/// Gaussian footprint parameters of the image formation model.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TexsrSplatConfig {
    pub sigma: f64,
    pub radius: u32,
    pub depth_epsilon: f64,
}

pub struct TexsrMesh(TriangleMesh);
pub struct TexsrAtlas(TexelAtlasMap);
pub struct TexsrCamera(CameraView);
pub struct TexsrOperator(SparseProjectionOperator);
pub struct TexsrTexture(TextureAtlas);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(TexsrStatus, String);

impl Failure {
    fn null(what: &str) -> Self {
        Self(TexsrStatus::NullPointer, format!("{what} is null"))
    }

    fn invalid(msg: impl Into<String>) -> Self {
        Self(TexsrStatus::InvalidArgument, msg.into())
    }
}

fn io<E: std::fmt::Display>(e: E) -> Failure {
    Failure(TexsrStatus::Io, e.to_string())
}

fn geometry<E: std::fmt::Display>(e: E) -> Failure {
    Failure(TexsrStatus::Geometry, e.to_string())
}

fn numerical<E: std::fmt::Display>(e: E) -> Failure {
    Failure(TexsrStatus::Numerical, e.to_string())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TexsrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            TexsrStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            TexsrStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    let s = unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Failure::invalid(format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    unsafe { p.as_ref() }.ok_or_else(|| Failure::null(what))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::null("output pointer"));
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(unsafe { Box::from_raw(p) });
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::null(what));
    }
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::null(what));
    }
    Ok(unsafe { std::slice::from_raw_parts_mut(p, len) })
}

fn rgb_from(data: &[f64]) -> Vec<[f64; 3]> {
    data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
}

fn rgb_into(rgb: &[[f64; 3]], out: &mut [f64]) {
    for (o, c) in out.chunks_exact_mut(3).zip(rgb) {
        o.copy_from_slice(c);
    }
}

/// Copies the message of the calling thread's last error into `buf`
/// (truncated, always NUL-terminated when `len > 0`). Returns the full
/// message length in bytes, or 0 when there is no error.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn texsr_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => {
            if !buf.is_null() && len > 0 {
                unsafe { *buf = 0 };
            }
            0
        }
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                unsafe {
                    ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                    *buf.add(n) = 0;
                }
            }
            bytes.len()
        }
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn texsr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default footprint parameters.
#[no_mangle]
pub extern "C" fn texsr_splat_default() -> TexsrSplatConfig {
    let d = SplatConfig::default();
    TexsrSplatConfig {
        sigma: d.sigma,
        radius: d.radius,
        depth_epsilon: d.depth_epsilon,
    }
}

/// Loads a Wavefront OBJ mesh with UVs and normals.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn texsr_mesh_load(path: *const c_char, out: *mut *mut TexsrMesh) -> TexsrStatus {
    guard(|| {
        let path = unsafe { path_arg(path, "path") }?;
        let mesh = load_mesh(&path).map_err(io)?;
        unsafe { store(out, TexsrMesh(mesh)) }
    })
}

/// # Safety
/// `mesh` must be null or a handle from `texsr_mesh_load`.
#[no_mangle]
pub unsafe extern "C" fn texsr_mesh_free(mesh: *mut TexsrMesh) {
    unsafe { free(mesh) }
}

/// Rasterizes the mesh's UV atlas at `width` x `height` texels.
///
/// # Safety
/// `mesh` must be a valid handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn texsr_atlas_new(
    mesh: *const TexsrMesh,
    width: usize,
    height: usize,
    out: *mut *mut TexsrAtlas,
) -> TexsrStatus {
    guard(|| {
        let mesh = unsafe { as_ref(mesh, "mesh") }?;
        let atlas = rasterize_atlas(&mesh.0, width, height).map_err(geometry)?;
        unsafe { store(out, TexsrAtlas(atlas)) }
    })
}

/// Number of texels covered by the mesh.
///
/// # Safety
/// `atlas` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn texsr_atlas_active_count(atlas: *const TexsrAtlas) -> usize {
    unsafe { atlas.as_ref() }.map_or(0, |a| a.0.active_count())
}

/// Copies the atlas mask into `mask` (`width * height` bytes).
///
/// # Safety
/// `atlas` must be valid; `mask` must hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn texsr_atlas_mask(atlas: *const TexsrAtlas, mask: *mut u8, len: usize) -> TexsrStatus {
    guard(|| {
        let atlas = unsafe { as_ref(atlas, "atlas") }?;
        if len != atlas.0.texel_count() {
            return Err(Failure::invalid(format!("mask length {len}, atlas has {} texels", atlas.0.texel_count())));
        }
        let out = unsafe { slice_mut(mask, len, "mask") }?;
        for (o, &m) in out.iter_mut().zip(atlas.0.mask()) {
            *o = m as u8;
        }
        Ok(())
    })
}

/// # Safety
/// `atlas` must be null or a handle from `texsr_atlas_new`.
#[no_mangle]
pub unsafe extern "C" fn texsr_atlas_free(atlas: *mut TexsrAtlas) {
    unsafe { free(atlas) }
}

/// Factors a row-major 3x4 projection matrix for a `width` x `height` image.
///
/// # Safety
/// `p` must point to 12 doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn texsr_camera_new(
    p: *const f64,
    width: usize,
    height: usize,
    out: *mut *mut TexsrCamera,
) -> TexsrStatus {
    guard(|| {
        let p = unsafe { slice(p, 12, "matrix") }?;
        let m = Matrix3x4::from_row_slice(p);
        let cam = decompose_projection(&m, width, height).map_err(numerical)?;
        unsafe { store(out, TexsrCamera(cam)) }
    })
}

/// Reads a camera file (projection matrix followed by the image size).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn texsr_camera_load(path: *const c_char, out: *mut *mut TexsrCamera) -> TexsrStatus {
    guard(|| {
        let path = unsafe { path_arg(path, "path") }?;
        let cam = read_camera_file(&path).map_err(io)?;
        unsafe { store(out, TexsrCamera(cam)) }
    })
}

/// Projects a world point; writes pixel coordinates to `pixel[0..2]` and
/// the camera-space depth to `depth` (may be null).
///
/// # Safety
/// `camera` must be valid, `point` must hold 3 doubles and `pixel` 2.
#[no_mangle]
pub unsafe extern "C" fn texsr_camera_project(
    camera: *const TexsrCamera,
    point: *const f64,
    pixel: *mut f64,
    depth: *mut f64,
) -> TexsrStatus {
    guard(|| {
        let cam = unsafe { as_ref(camera, "camera") }?;
        let x = unsafe { slice(point, 3, "point") }?;
        let out = unsafe { slice_mut(pixel, 2, "pixel") }?;
        let pr = project_point(&cam.0, [x[0], x[1], x[2]]).map_err(numerical)?;
        out.copy_from_slice(&pr.pixel);
        if !depth.is_null() {
            unsafe { *depth = pr.depth };
        }
        Ok(())
    })
}

/// Writes the camera's image size.
///
/// # Safety
/// `camera` must be valid; `width` and `height` must be writable.
#[no_mangle]
pub unsafe extern "C" fn texsr_camera_size(
    camera: *const TexsrCamera,
    width: *mut usize,
    height: *mut usize,
) -> TexsrStatus {
    guard(|| {
        let cam = unsafe { as_ref(camera, "camera") }?;
        if width.is_null() || height.is_null() {
            return Err(Failure::null("size output"));
        }
        unsafe {
            *width = cam.0.width;
            *height = cam.0.height;
        }
        Ok(())
    })
}

/// # Safety
/// `camera` must be null or a handle from `texsr_camera_new`/`_load`.
#[no_mangle]
pub unsafe extern "C" fn texsr_camera_free(camera: *mut TexsrCamera) {
    unsafe { free(camera) }
}

/// Builds the projection operator from the atlas into one view.
///
/// # Safety
/// All handles must be valid; `splat` may be null for defaults.
#[no_mangle]
pub unsafe extern "C" fn texsr_operator_new(
    mesh: *const TexsrMesh,
    atlas: *const TexsrAtlas,
    camera: *const TexsrCamera,
    splat: *const TexsrSplatConfig,
    out: *mut *mut TexsrOperator,
) -> TexsrStatus {
    guard(|| {
        let mesh = unsafe { as_ref(mesh, "mesh") }?;
        let atlas = unsafe { as_ref(atlas, "atlas") }?;
        let cam = unsafe { as_ref(camera, "camera") }?;
        let cfg = match unsafe { splat.as_ref() } {
            Some(s) => SplatConfig {
                sigma: s.sigma,
                radius: s.radius,
                depth_epsilon: s.depth_epsilon,
            },
            None => SplatConfig::default(),
        };
        let op = build_operator(&mesh.0, &atlas.0, &cam.0, &cfg).map_err(geometry)?;
        unsafe { store(out, TexsrOperator(op)) }
    })
}

/// Number of stored weights.
///
/// # Safety
/// `op` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn texsr_operator_nnz(op: *const TexsrOperator) -> usize {
    unsafe { op.as_ref() }.map_or(0, |o| o.0.nnz())
}

/// Renders `texture` into the view: `rgb_out` receives `3 * width * height`
/// doubles.
///
/// # Safety
/// Handles must be valid; `rgb_out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn texsr_operator_forward(
    op: *const TexsrOperator,
    texture: *const TexsrTexture,
    rgb_out: *mut f64,
    len: usize,
) -> TexsrStatus {
    guard(|| {
        let op = unsafe { as_ref(op, "operator") }?;
        let tex = unsafe { as_ref(texture, "texture") }?;
        if len != 3 * op.0.pixel_count() {
            return Err(Failure::invalid(format!("output length {len}, need {}", 3 * op.0.pixel_count())));
        }
        let img = apply_forward(&op.0, &tex.0).map_err(|e| Failure::invalid(e.to_string()))?;
        rgb_into(&img.rgb, unsafe { slice_mut(rgb_out, len, "output") }?);
        Ok(())
    })
}

/// Applies the transposed operator to an image: `rgb_out` receives
/// `3 * texels` weighted sums.
///
/// # Safety
/// `op` must be valid; `rgb_in` must hold `3 * pixels` doubles and
/// `rgb_out` `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn texsr_operator_adjoint(
    op: *const TexsrOperator,
    rgb_in: *const f64,
    rgb_out: *mut f64,
    len: usize,
) -> TexsrStatus {
    guard(|| {
        let op = unsafe { as_ref(op, "operator") }?;
        if len != 3 * op.0.texel_count() {
            return Err(Failure::invalid(format!("output length {len}, need {}", 3 * op.0.texel_count())));
        }
        let (w, h) = op.0.view_size();
        let input = unsafe { slice(rgb_in, 3 * w * h, "input") }?;
        let img = ViewImage {
            width: w,
            height: h,
            rgb: rgb_from(input),
            coverage: vec![true; w * h],
        };
        let acc = apply_adjoint(&op.0, &img).map_err(|e| Failure::invalid(e.to_string()))?;
        rgb_into(&acc.rgb, unsafe { slice_mut(rgb_out, len, "output") }?);
        Ok(())
    })
}

/// # Safety
/// `op` must be null or a handle from `texsr_operator_new`.
#[no_mangle]
pub unsafe extern "C" fn texsr_operator_free(op: *mut TexsrOperator) {
    unsafe { free(op) }
}

/// Creates a texture from interleaved RGB and a byte mask. Inactive texels
/// are zeroed.
///
/// # Safety
/// `rgb` must hold `3 * width * height` doubles and `mask` `width * height`
/// bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn texsr_texture_new(
    width: usize,
    height: usize,
    rgb: *const f64,
    mask: *const u8,
    out: *mut *mut TexsrTexture,
) -> TexsrStatus {
    guard(|| {
        let n = width
            .checked_mul(height)
            .filter(|&n| n > 0)
            .ok_or_else(|| Failure::invalid("texture size must be positive"))?;
        let rgb = unsafe { slice(rgb, 3 * n, "rgb") }?;
        let mask = unsafe { slice(mask, n, "mask") }?;
        let tex = TextureAtlas::new(width, height, rgb_from(rgb), mask.iter().map(|&m| m != 0).collect());
        unsafe { store(out, TexsrTexture(tex)) }
    })
}

/// Reads a texture PNG and an optional mask PNG (`mask_path` may be null).
///
/// # Safety
/// Paths must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn texsr_texture_load(
    path: *const c_char,
    mask_path: *const c_char,
    out: *mut *mut TexsrTexture,
) -> TexsrStatus {
    guard(|| {
        let path = unsafe { path_arg(path, "path") }?;
        let mask = if mask_path.is_null() {
            None
        } else {
            Some(unsafe { path_arg(mask_path, "mask path") }?)
        };
        let tex = read_texture(&path, mask.as_deref()).map_err(io)?;
        unsafe { store(out, TexsrTexture(tex)) }
    })
}

/// Writes a 16-bit texture PNG and, when `mask_path` is not null, its mask.
///
/// # Safety
/// `texture` must be valid; paths must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn texsr_texture_save(
    texture: *const TexsrTexture,
    path: *const c_char,
    mask_path: *const c_char,
) -> TexsrStatus {
    guard(|| {
        let tex = unsafe { as_ref(texture, "texture") }?;
        let path = unsafe { path_arg(path, "path") }?;
        let mask = if mask_path.is_null() {
            None
        } else {
            Some(unsafe { path_arg(mask_path, "mask path") }?)
        };
        write_texture(&path, mask.as_deref(), &tex.0, TextureDepth::Sixteen).map_err(io)
    })
}

/// Writes the texture size.
///
/// # Safety
/// `texture` must be valid; `width` and `height` must be writable.
#[no_mangle]
pub unsafe extern "C" fn texsr_texture_size(
    texture: *const TexsrTexture,
    width: *mut usize,
    height: *mut usize,
) -> TexsrStatus {
    guard(|| {
        let tex = unsafe { as_ref(texture, "texture") }?;
        if width.is_null() || height.is_null() {
            return Err(Failure::null("size output"));
        }
        unsafe {
            *width = tex.0.width;
            *height = tex.0.height;
        }
        Ok(())
    })
}

/// Copies colors (`3 * width * height` doubles) and, if `mask` is not null,
/// the mask bytes.
///
/// # Safety
/// `texture` must be valid; `rgb` must hold `len` doubles and `mask`
/// `len / 3` bytes.
#[no_mangle]
pub unsafe extern "C" fn texsr_texture_data(
    texture: *const TexsrTexture,
    rgb: *mut f64,
    mask: *mut u8,
    len: usize,
) -> TexsrStatus {
    guard(|| {
        let tex = unsafe { as_ref(texture, "texture") }?;
        let n = tex.0.rgb.len();
        if len != 3 * n {
            return Err(Failure::invalid(format!("length {len}, need {}", 3 * n)));
        }
        rgb_into(&tex.0.rgb, unsafe { slice_mut(rgb, len, "rgb") }?);
        if !mask.is_null() {
            let m = unsafe { slice_mut(mask, n, "mask") }?;
            for (o, &a) in m.iter_mut().zip(&tex.0.mask) {
                *o = a as u8;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `texture` must be null or a handle returned by this library.
#[no_mangle]
pub unsafe extern "C" fn texsr_texture_free(texture: *mut TexsrTexture) {
    unsafe { free(texture) }
}

/// Retrieves a texture from `count` views. `images[v]` holds the RGB
/// pixels of view `v` at the size of `ops[v]`. With `least_squares` set the
/// regularized least-squares estimate is computed with `lambda`,
/// `max_iters` and `tol`; otherwise the weighted average.
///
/// # Safety
/// `ops` and `images` must hold `count` valid pointers; `atlas` must be
/// valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn texsr_retrieve(
    ops: *const *const TexsrOperator,
    images: *const *const f64,
    count: usize,
    atlas: *const TexsrAtlas,
    least_squares: bool,
    lambda: f64,
    max_iters: usize,
    tol: f64,
    out: *mut *mut TexsrTexture,
) -> TexsrStatus {
    guard(|| {
        let atlas = unsafe { as_ref(atlas, "atlas") }?;
        let op_ptrs = unsafe { slice(ops, count, "operators") }?;
        let img_ptrs = unsafe { slice(images, count, "images") }?;
        let mut owned_ops = Vec::with_capacity(count);
        let mut views = Vec::with_capacity(count);
        for (&o, &i) in op_ptrs.iter().zip(img_ptrs) {
            let op = unsafe { as_ref(o, "operator") }?;
            let (w, h) = op.0.view_size();
            let data = unsafe { slice(i, 3 * w * h, "image") }?;
            views.push(ViewImage {
                width: w,
                height: h,
                rgb: rgb_from(data),
                coverage: op.0.coverage(),
            });
            owned_ops.push(op.0.clone());
        }
        let texture = if least_squares {
            let cfg = RetrievalConfig {
                mode: RetrievalMode::LeastSquares,
                lambda,
                max_iters,
                tol,
            };
            retrieve_least_squares(&owned_ops, &views, &atlas.0, &cfg)
                .map_err(|e| Failure::invalid(e.to_string()))?
                .texture
        } else {
            retrieve_backprojection(&owned_ops, &views, &atlas.0)
                .map_err(|e| Failure::invalid(e.to_string()))?
                .texture
        };
        unsafe { store(out, TexsrTexture(texture)) }
    })
}

/// Upsamples `lr` by `scale` onto an HR mask of `hr_width` x `hr_height`.
///
/// # Safety
/// `lr` must be valid; `hr_mask` must hold `hr_width * hr_height` bytes;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn texsr_upsample(
    lr: *const TexsrTexture,
    scale: u32,
    kernel: TexsrKernel,
    hr_mask: *const u8,
    hr_width: usize,
    hr_height: usize,
    out: *mut *mut TexsrTexture,
) -> TexsrStatus {
    guard(|| {
        let lr = unsafe { as_ref(lr, "texture") }?;
        let mask: Vec<bool> = unsafe { slice(hr_mask, hr_width * hr_height, "mask") }?
            .iter()
            .map(|&m| m != 0)
            .collect();
        let kernel = match kernel {
            TexsrKernel::Nearest => InterpKernel::Nearest,
            TexsrKernel::Bilinear => InterpKernel::Bilinear,
            TexsrKernel::Bicubic => InterpKernel::Bicubic,
            TexsrKernel::Lanczos => InterpKernel::Lanczos,
        };
        let r = upsample_interp(&lr.0, scale, kernel, &mask, (hr_width, hr_height))
            .map_err(|e| Failure::invalid(e.to_string()))?;
        unsafe { store(out, TexsrTexture(r.texture)) }
    })
}

/// Masked PSNR in dB; identical inputs give +infinity.
///
/// # Safety
/// Handles must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn texsr_masked_psnr(
    a: *const TexsrTexture,
    b: *const TexsrTexture,
    out: *mut f64,
) -> TexsrStatus {
    guard(|| {
        let (a, b) = unsafe { (as_ref(a, "a")?, as_ref(b, "b")?) };
        let v = masked_psnr(&a.0, &b.0).map_err(|e| Failure::invalid(e.to_string()))?;
        if out.is_null() {
            return Err(Failure::null("output"));
        }
        unsafe { *out = v };
        Ok(())
    })
}

/// Masked SSIM on luma.
///
/// # Safety
/// Handles must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn texsr_masked_ssim(
    a: *const TexsrTexture,
    b: *const TexsrTexture,
    out: *mut f64,
) -> TexsrStatus {
    guard(|| {
        let (a, b) = unsafe { (as_ref(a, "a")?, as_ref(b, "b")?) };
        let v = masked_ssim(&a.0, &b.0).map_err(|e| Failure::invalid(e.to_string()))?;
        if out.is_null() {
            return Err(Failure::null("output"));
        }
        unsafe { *out = v };
        Ok(())
    })
}

/// Runs a `texsr` command line (`argv[0]` is the program name) and returns
/// its exit code. Output lines go to standard output.
///
/// # Safety
/// `argv` must hold `argc` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn texsr_run_cli(argc: usize, argv: *const *const c_char) -> i32 {
    let mut code = texsr::cli::EXIT_USAGE;
    let status = guard(|| {
        let ptrs = unsafe { slice(argv, argc, "argv") }?;
        let args = ptrs
            .iter()
            .map(|&p| unsafe { path_arg(p, "argument") }.map(PathBuf::into_os_string))
            .collect::<Result<Vec<_>, _>>()?;
        let r = texsr::cli::run_command(args);
        for line in &r.lines {
            println!("{line}");
        }
        code = r.exit_code;
        Ok(())
    });
    if status == TexsrStatus::Ok {
        code
    } else {
        texsr::cli::EXIT_USAGE
    }
}
