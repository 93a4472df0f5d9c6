#ifndef SPOTSLAB_H
#define SPOTSLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum SpotsStatus {
  SPOTS_STATUS_OK = 0,
  SPOTS_STATUS_NULL_POINTER = 1,
  SPOTS_STATUS_INVALID_ARGUMENT = 2,
  SPOTS_STATUS_IO = 3,
  SPOTS_STATUS_SCHEMA = 4,
  SPOTS_STATUS_CONFIG = 5,
  SPOTS_STATUS_CONTRACT = 6,
  SPOTS_STATUS_CHECKPOINT = 7,
  SPOTS_STATUS_BUFFER_TOO_SMALL = 8,
  SPOTS_STATUS_INTERNAL = 9,
  SPOTS_STATUS_PANIC = 10,
} SpotsStatus;

/*
 A loaded or generated episode.
 */
typedef struct SpotsEpisode SpotsEpisode;

/*
 A model checkpoint ready for prediction.
 */
typedef struct SpotsModel SpotsModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copies the calling thread's last error message into `buf` (always
 NUL-terminated when `len > 0`) and returns the full message length in
 bytes, excluding the terminator. Returns 0 when there is no error.
 */
size_t spots_last_error_message(char *buf, size_t len);

/*
 Library version as a static NUL-terminated string.
 */
const char *spots_version(void);

/*
 Simulates one push with a randomised set-up for `layout` (for example
 `"corner_tl"`).
 */
enum SpotsStatus spots_episode_generate(const char *layout,
                                        uint64_t seed,
                                        struct SpotsEpisode **out);

/*
 Trial `index` (0..4) of the edge-case suite.
 */
enum SpotsStatus spots_episode_edge_case(uint32_t index, struct SpotsEpisode **out);

enum SpotsStatus spots_episode_load(const char *path, struct SpotsEpisode **out);

enum SpotsStatus spots_episode_save(const struct SpotsEpisode *episode, const char *path);

enum SpotsStatus spots_episode_len(const struct SpotsEpisode *episode, size_t *out);

/*
 Copies frame `index` as row-major `height x width x 3` floats in `[0, 1]`
 and reports its size.
 */
enum SpotsStatus spots_episode_scene(const struct SpotsEpisode *episode,
                                     size_t index,
                                     float *buf,
                                     size_t len,
                                     size_t *height,
                                     size_t *width);

/*
 Copies the 48 raw taxel values of frame `index`, ordered row, column,
 channel.
 */
enum SpotsStatus spots_episode_tactile(const struct SpotsEpisode *episode,
                                       size_t index,
                                       float *buf,
                                       size_t len);

void spots_episode_free(struct SpotsEpisode *episode);

/*
 Writes a dataset described by a JSON dataset spec under `root`.
 */
enum SpotsStatus spots_dataset_generate(const char *spec_json, const char *root);

/*
 Mean absolute error of two `height x width x 3` frames.
 */
enum SpotsStatus spots_mae(const float *pred,
                           const float *truth,
                           size_t height,
                           size_t width,
                           double *out);

/*
 PSNR in dB with peak 1, capped at 100.
 */
enum SpotsStatus spots_psnr(const float *pred,
                            const float *truth,
                            size_t height,
                            size_t width,
                            double *out);

/*
 Gaussian-window SSIM averaged over channels.
 */
enum SpotsStatus spots_ssim(const float *pred,
                            const float *truth,
                            size_t height,
                            size_t width,
                            double *out);

enum SpotsStatus spots_model_load(const char *path, struct SpotsModel **out);

/*
 Copies the model kind name (for example `"SPOTS"`) into `buf`.
 */
enum SpotsStatus spots_model_kind(const struct SpotsModel *model, char *buf, size_t len);

enum SpotsStatus spots_model_parameter_count(const struct SpotsModel *model, size_t *out);

/*
 Predicts `horizon` frames of `episode` from the context that starts at
 frame `start`, sampling latents from the prior with `noise_seed`. Writes
 `horizon x height x width x 3` floats.
 */
enum SpotsStatus spots_model_predict(const struct SpotsModel *model,
                                     const struct SpotsEpisode *episode,
                                     size_t start,
                                     size_t horizon,
                                     uint64_t noise_seed,
                                     float *buf,
                                     size_t len);

void spots_model_free(struct SpotsModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPOTSLAB_H */
