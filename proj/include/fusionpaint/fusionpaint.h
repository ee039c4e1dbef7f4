/* fusionpaint: LiDAR point painting with 2D/3D semantic labels fused by a
 * per-voxel attention gate, plus the synthetic benchmark around it.
 *
 * C ABI over the C++ core. All functions return fp_status; 0 is success and
 * nonzero codes match the CLI exit codes. fp_last_error() describes the most
 * recent failure on the calling thread. Handles are opaque and must be
 * released with their _close function.
 */
#ifndef FUSIONPAINT_H
#define FUSIONPAINT_H

#include <stdint.h>

#if defined(_WIN32)
#define FP_API __declspec(dllexport)
#else
#define FP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef int32_t fp_status;

enum {
    FP_OK = 0,
    FP_ERROR_CONFIG = 2,     /* bad or missing configuration */
    FP_ERROR_GENERATION = 3, /* scene generation failed */
    FP_ERROR_DATA = 4,       /* malformed or unreadable data file */
    FP_ERROR_SHAPE = 5,      /* checkpoint/dataset dimension mismatch */
    FP_ERROR_INTERNAL = 6
};

FP_API const char* fp_version(void);

/* Message for the last failing call on this thread; empty string if none. */
FP_API const char* fp_last_error(void);

/* ---- pipeline commands (mirror the CLI) ---------------------------------
 * seed_override < 0 keeps the seed from the config file. String arguments
 * must be non-NULL unless stated otherwise.
 */

/* Build a synthetic dataset under out_dir from a JSON config. */
FP_API fp_status fp_synth(const char* config_path, const char* out_dir, int64_t seed_override);

/* Re-paint score files in one scene directory. mode: "2d", "3d" or "both". */
FP_API fp_status fp_paint(const char* scene_dir, const char* mode);

/* Gate one scene's voxels with a checkpoint; writes an FPVX voxel file.
 * voxel_config_path may be NULL for the default grid. */
FP_API fp_status fp_fuse(const char* scene_dir, const char* checkpoint_path,
                         const char* voxel_config_path, const char* out_path);

/* Train one modality arm. modality_override may be NULL (use the config).
 * Writes ckpt_<modality>.fpnn and metrics.csv under out_dir. */
FP_API fp_status fp_train(const char* dataset_dir, const char* config_path,
                          const char* modality_override, int64_t seed_override,
                          const char* out_dir);

/* Evaluate the checkpoints named in the config; writes the report JSON. */
FP_API fp_status fp_eval(const char* dataset_dir, const char* config_path,
                         const char* report_path);

/* Write painted point clouds (.fppt) for every scene of a split.
 * voxel_config_path may be NULL for the default grid. */
FP_API fp_status fp_export(const char* dataset_dir, const char* checkpoint_path,
                           const char* split, const char* voxel_config_path,
                           const char* out_dir);

/* ---- handles ------------------------------------------------------------ */

typedef struct fp_scene fp_scene;
typedef struct fp_model fp_model;

FP_API fp_status fp_scene_open(const char* scene_dir, fp_scene** out);
FP_API void fp_scene_close(fp_scene* scene);
FP_API fp_status fp_scene_stats(const fp_scene* scene, uint32_t* points, uint32_t* boxes,
                                uint32_t* classes);

FP_API fp_status fp_model_open(const char* checkpoint_path, fp_model** out);
FP_API fp_status fp_model_init(uint32_t classes, uint64_t seed, fp_model** out);
FP_API void fp_model_close(fp_model* model);
FP_API fp_status fp_model_save(const fp_model* model, const char* path);
FP_API fp_status fp_model_dims(const fp_model* model, uint32_t* classes, uint32_t* c1,
                               uint32_t* c2);

/* Per-voxel attention scores for one scene under the default (or given)
 * voxel grid. Writes up to capacity values; *count receives the voxel count.
 */
FP_API fp_status fp_scene_attention(const fp_scene* scene, const fp_model* model,
                                    const char* voxel_config_path, float* out_sigma,
                                    uint32_t capacity, uint32_t* count);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* FUSIONPAINT_H */
