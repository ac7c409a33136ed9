/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef TEXSR_H
#define TEXSR_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result of every fallible call.
typedef enum TexsrStatus {
  TEXSR_STATUS_OK = 0,
  TEXSR_STATUS_NULL_POINTER = 1,
  TEXSR_STATUS_INVALID_ARGUMENT = 2,
  TEXSR_STATUS_IO = 3,
  TEXSR_STATUS_GEOMETRY = 4,
  TEXSR_STATUS_NUMERICAL = 5,
  TEXSR_STATUS_PANIC = 6,
} TexsrStatus;

// Interpolation kernels for [`texsr_upsample`].
typedef enum TexsrKernel {
  TEXSR_KERNEL_NEAREST = 0,
  TEXSR_KERNEL_BILINEAR = 1,
  TEXSR_KERNEL_BICUBIC = 2,
  TEXSR_KERNEL_LANCZOS = 3,
} TexsrKernel;

typedef struct TexsrAtlas TexsrAtlas;

typedef struct TexsrCamera TexsrCamera;

typedef struct TexsrMesh TexsrMesh;

typedef struct TexsrOperator TexsrOperator;

typedef struct TexsrTexture TexsrTexture;

// Gaussian footprint parameters of the image formation model.
typedef struct TexsrSplatConfig {
  double sigma;
  uint32_t radius;
  double depth_epsilon;
} TexsrSplatConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the message of the calling thread's last error into `buf`
// (truncated, always NUL-terminated when `len > 0`). Returns the full
// message length in bytes, or 0 when there is no error.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t texsr_last_error(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *texsr_version(void);

// Default footprint parameters.
struct TexsrSplatConfig texsr_splat_default(void);

// Loads a Wavefront OBJ mesh with UVs and normals.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum TexsrStatus texsr_mesh_load(const char *path, struct TexsrMesh **out);

// # Safety
// `mesh` must be null or a handle from `texsr_mesh_load`.
void texsr_mesh_free(struct TexsrMesh *mesh);

// Rasterizes the mesh's UV atlas at `width` x `height` texels.
//
// # Safety
// `mesh` must be a valid handle; `out` must be writable.
enum TexsrStatus texsr_atlas_new(const struct TexsrMesh *mesh,
                                 size_t width,
                                 size_t height,
                                 struct TexsrAtlas **out);

// Number of texels covered by the mesh.
//
// # Safety
// `atlas` must be null or a valid handle.
size_t texsr_atlas_active_count(const struct TexsrAtlas *atlas);

// Copies the atlas mask into `mask` (`width * height` bytes).
//
// # Safety
// `atlas` must be valid; `mask` must hold `len` bytes.
enum TexsrStatus texsr_atlas_mask(const struct TexsrAtlas *atlas, uint8_t *mask, size_t len);

// # Safety
// `atlas` must be null or a handle from `texsr_atlas_new`.
void texsr_atlas_free(struct TexsrAtlas *atlas);

// Factors a row-major 3x4 projection matrix for a `width` x `height` image.
//
// # Safety
// `p` must point to 12 doubles; `out` must be writable.
enum TexsrStatus texsr_camera_new(const double *p,
                                  size_t width,
                                  size_t height,
                                  struct TexsrCamera **out);

// Reads a camera file (projection matrix followed by the image size).
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum TexsrStatus texsr_camera_load(const char *path, struct TexsrCamera **out);

// Projects a world point; writes pixel coordinates to `pixel[0..2]` and
// the camera-space depth to `depth` (may be null).
//
// # Safety
// `camera` must be valid, `point` must hold 3 doubles and `pixel` 2.
enum TexsrStatus texsr_camera_project(const struct TexsrCamera *camera,
                                      const double *point,
                                      double *pixel,
                                      double *depth);

// Writes the camera's image size.
//
// # Safety
// `camera` must be valid; `width` and `height` must be writable.
enum TexsrStatus texsr_camera_size(const struct TexsrCamera *camera, size_t *width, size_t *height);

// # Safety
// `camera` must be null or a handle from `texsr_camera_new`/`_load`.
void texsr_camera_free(struct TexsrCamera *camera);

// Builds the projection operator from the atlas into one view.
//
// # Safety
// All handles must be valid; `splat` may be null for defaults.
enum TexsrStatus texsr_operator_new(const struct TexsrMesh *mesh,
                                    const struct TexsrAtlas *atlas,
                                    const struct TexsrCamera *camera,
                                    const struct TexsrSplatConfig *splat,
                                    struct TexsrOperator **out);

// Number of stored weights.
//
// # Safety
// `op` must be null or a valid handle.
size_t texsr_operator_nnz(const struct TexsrOperator *op);

// Renders `texture` into the view: `rgb_out` receives `3 * width * height`
// doubles.
//
// # Safety
// Handles must be valid; `rgb_out` must hold `len` doubles.
enum TexsrStatus texsr_operator_forward(const struct TexsrOperator *op,
                                        const struct TexsrTexture *texture,
                                        double *rgb_out,
                                        size_t len);

// Applies the transposed operator to an image: `rgb_out` receives
// `3 * texels` weighted sums.
//
// # Safety
// `op` must be valid; `rgb_in` must hold `3 * pixels` doubles and
// `rgb_out` `len` doubles.
enum TexsrStatus texsr_operator_adjoint(const struct TexsrOperator *op,
                                        const double *rgb_in,
                                        double *rgb_out,
                                        size_t len);

// # Safety
// `op` must be null or a handle from `texsr_operator_new`.
void texsr_operator_free(struct TexsrOperator *op);

// Creates a texture from interleaved RGB and a byte mask. Inactive texels
// are zeroed.
//
// # Safety
// `rgb` must hold `3 * width * height` doubles and `mask` `width * height`
// bytes; `out` must be writable.
enum TexsrStatus texsr_texture_new(size_t width,
                                   size_t height,
                                   const double *rgb,
                                   const uint8_t *mask,
                                   struct TexsrTexture **out);

// Reads a texture PNG and an optional mask PNG (`mask_path` may be null).
//
// # Safety
// Paths must be NUL-terminated strings; `out` must be writable.
enum TexsrStatus texsr_texture_load(const char *path,
                                    const char *mask_path,
                                    struct TexsrTexture **out);

// Writes a 16-bit texture PNG and, when `mask_path` is not null, its mask.
//
// # Safety
// `texture` must be valid; paths must be NUL-terminated strings.
enum TexsrStatus texsr_texture_save(const struct TexsrTexture *texture,
                                    const char *path,
                                    const char *mask_path);

// Writes the texture size.
//
// # Safety
// `texture` must be valid; `width` and `height` must be writable.
enum TexsrStatus texsr_texture_size(const struct TexsrTexture *texture,
                                    size_t *width,
                                    size_t *height);

// Copies colors (`3 * width * height` doubles) and, if `mask` is not null,
// the mask bytes.
//
// # Safety
// `texture` must be valid; `rgb` must hold `len` doubles and `mask`
// `len / 3` bytes.
enum TexsrStatus texsr_texture_data(const struct TexsrTexture *texture,
                                    double *rgb,
                                    uint8_t *mask,
                                    size_t len);

// # Safety
// `texture` must be null or a handle returned by this library.
void texsr_texture_free(struct TexsrTexture *texture);

// Retrieves a texture from `count` views. `images[v]` holds the RGB
// pixels of view `v` at the size of `ops[v]`. With `least_squares` set the
// regularized least-squares estimate is computed with `lambda`,
// `max_iters` and `tol`; otherwise the weighted average.
//
// # Safety
// `ops` and `images` must hold `count` valid pointers; `atlas` must be
// valid; `out` must be writable.
enum TexsrStatus texsr_retrieve(const struct TexsrOperator *const *ops,
                                const double *const *images,
                                size_t count,
                                const struct TexsrAtlas *atlas,
                                bool least_squares,
                                double lambda,
                                size_t max_iters,
                                double tol,
                                struct TexsrTexture **out);

// Upsamples `lr` by `scale` onto an HR mask of `hr_width` x `hr_height`.
//
// # Safety
// `lr` must be valid; `hr_mask` must hold `hr_width * hr_height` bytes;
// `out` must be writable.
enum TexsrStatus texsr_upsample(const struct TexsrTexture *lr,
                                uint32_t scale,
                                enum TexsrKernel kernel,
                                const uint8_t *hr_mask,
                                size_t hr_width,
                                size_t hr_height,
                                struct TexsrTexture **out);

// Masked PSNR in dB; identical inputs give +infinity.
//
// # Safety
// Handles must be valid; `out` must be writable.
enum TexsrStatus texsr_masked_psnr(const struct TexsrTexture *a,
                                   const struct TexsrTexture *b,
                                   double *out);

// Masked SSIM on luma.
//
// # Safety
// Handles must be valid; `out` must be writable.
enum TexsrStatus texsr_masked_ssim(const struct TexsrTexture *a,
                                   const struct TexsrTexture *b,
                                   double *out);

// Runs a `texsr` command line (`argv[0]` is the program name) and returns
// its exit code. Output lines go to standard output.
//
// # Safety
// `argv` must hold `argc` NUL-terminated strings.
int32_t texsr_run_cli(size_t argc, const char *const *argv);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TEXSR_H */
