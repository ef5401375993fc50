/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef APA_H
#define APA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum ApaStatus {
  APA_STATUS_OK = 0,
  // A required pointer argument was null.
  APA_STATUS_NULL_POINTER = 1,
  APA_STATUS_INVALID_ARGUMENT = 2,
  APA_STATUS_DIMENSION_MISMATCH = 3,
  APA_STATUS_IO = 4,
  APA_STATUS_FORMAT = 5,
  // Checkpoint is missing, of the wrong role, or paired with one trained
  // for a different noise level.
  APA_STATUS_CHECKPOINT = 6,
  APA_STATUS_PANIC = 7,
} ApaStatus;

// Opaque light field, `f32` samples in `[v][s][y][x]` order.
typedef struct ApaLightField ApaLightField;

// Opaque trained model: a synthesis network and, optionally, the
// compensation network it was paired with.
typedef struct ApaModel ApaModel;

// Light-field dimensions: `w x h` pixels per view, `n_h x n_v` views.
typedef struct ApaDims {
  size_t w;
  size_t h;
  size_t n_h;
  size_t n_v;
} ApaDims;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty if none. The
// pointer stays valid until the next failing call on the same thread.
const char *apa_last_error(void);

// Library version as a static NUL-terminated string.
const char *apa_version(void);

// Creates a light field from `w*h*n_h*n_v` samples, or zeros if `data` is null.
//
// # Safety
// `data` must be null or point to `w*h*n_h*n_v` readable floats; `out` must
// be a valid pointer.
enum ApaStatus apa_lf_new(struct ApaDims dims, const float *data, struct ApaLightField **out);

// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum ApaStatus apa_lf_load(const char *path, struct ApaLightField **out);

// # Safety
// `lf` must be a live handle and `path` a NUL-terminated string.
enum ApaStatus apa_lf_save(const struct ApaLightField *lf, const char *path);

// # Safety
// `lf` must be a live handle and `out` a valid pointer.
enum ApaStatus apa_lf_dims(const struct ApaLightField *lf, struct ApaDims *out);

// Copies all samples into `dst`, which must hold exactly `len` floats.
//
// # Safety
// `lf` must be a live handle and `dst` must point to `len` writable floats.
enum ApaStatus apa_lf_copy_data(const struct ApaLightField *lf, float *dst, size_t len);

// Frees a light field; null is ignored.
//
// # Safety
// `lf` must be null or a handle not yet freed.
void apa_lf_free(struct ApaLightField *lf);

// Adds white Gaussian noise of standard deviation `sigma_255` on the
// [0,255] scale, reproducibly for a given `seed`.
//
// # Safety
// `lf` must be a live handle and `out` a valid pointer.
enum ApaStatus apa_add_awgn(const struct ApaLightField *lf,
                            double sigma_255,
                            uint64_t seed,
                            struct ApaLightField **out);

// Loads a synthesis checkpoint and, if `view_path` is non-null, the
// compensation checkpoint paired with it.
//
// # Safety
// `syn_path` must be a NUL-terminated string, `view_path` null or one, and
// `out` a valid pointer.
enum ApaStatus apa_model_load(const char *syn_path, const char *view_path, struct ApaModel **out);

// Noise level (on the [0,255] scale) the model was trained for.
//
// # Safety
// `model` must be a live handle and `out` a valid pointer.
enum ApaStatus apa_model_sigma(const struct ApaModel *model, double *out);

// # Safety
// `model` must be null or a handle not yet freed.
void apa_model_free(struct ApaModel *model);

// Full two-stage denoising. The model must include a compensation network.
//
// # Safety
// `model` and `noisy` must be live handles and `out` a valid pointer.
enum ApaStatus apa_denoise(const struct ApaModel *model,
                           const struct ApaLightField *noisy,
                           struct ApaLightField **out);

// Synthesis stage only.
//
// # Safety
// `model` and `noisy` must be live handles and `out` a valid pointer.
enum ApaStatus apa_denoise_syn(const struct ApaModel *model,
                               const struct ApaLightField *noisy,
                               struct ApaLightField **out);

// Baseline that replaces every view with the mean view.
//
// # Safety
// `noisy` must be a live handle and `out` a valid pointer.
enum ApaStatus apa_avg_all(const struct ApaLightField *noisy, struct ApaLightField **out);

// Mean per-view PSNR (peak 1, may be +inf for identical inputs) and SSIM.
//
// # Safety
// `gt` and `test` must be live handles; `psnr` and `ssim` valid pointers.
enum ApaStatus apa_quality(const struct ApaLightField *gt,
                           const struct ApaLightField *test,
                           double *psnr,
                           double *ssim);

// Noise standard deviation estimate on the [0,255] scale.
//
// # Safety
// `lf` must be a live handle and `out` a valid pointer.
enum ApaStatus apa_estimate_sigma(const struct ApaLightField *lf, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* APA_H */
