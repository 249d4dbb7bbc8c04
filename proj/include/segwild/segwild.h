/* Copyright Contributors to the segwild project
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface of the segwild shared library. Objects are opaque handles
 * owned by the caller and released with the matching *_free function.
 * Every fallible call returns an sw_status; on failure sw_last_error()
 * describes the most recent error of the calling thread. Strings returned
 * through char** are heap copies released with sw_string_free.
 */
#ifndef SEGWILD_H
#define SEGWILD_H

#include <stddef.h>

#if defined(SEGWILD_BUILDING_LIBRARY)
#define SW_API __attribute__((visibility("default")))
#else
#define SW_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sw_status {
    SW_OK                       = 0,
    SW_ERR_INVALID_ARGUMENT     = 1,
    SW_ERR_VALIDATION           = 2,
    SW_ERR_IO                   = 3,
    SW_ERR_FORMAT               = 4,
    SW_ERR_NOT_FOUND            = 5,
    SW_ERR_DIMENSION_MISMATCH   = 6,
    SW_ERR_RUNTIME              = 7
} sw_status;

typedef struct sw_scene sw_scene;
typedef struct sw_camera sw_camera;
typedef struct sw_segmentation sw_segmentation;
typedef struct sw_server sw_server;

SW_API const char *sw_version(void);
SW_API const char *sw_status_name(sw_status status);
/* Empty string when the calling thread has seen no error. */
SW_API const char *sw_last_error(void);
SW_API void sw_string_free(char *s);

/* Worker threads for rendering and training; 0 means all cores. */
SW_API void sw_set_threads(unsigned threads);

/* Scenes: splat PLY plus an optional ".affn" affinity sidecar. */
SW_API sw_status sw_scene_load(const char *path, sw_scene **out);
SW_API sw_status sw_scene_save(const sw_scene *scene, const char *path);
SW_API sw_status sw_scene_info(const sw_scene *scene, size_t *count, size_t *feature_dim);
SW_API void sw_scene_free(sw_scene *scene);

SW_API sw_status sw_camera_load(const char *path, sw_camera **out);
SW_API sw_status sw_camera_from_json(const char *json, sw_camera **out);
SW_API sw_status sw_camera_size(const sw_camera *camera, int *width, int *height);
SW_API void sw_camera_free(sw_camera *camera);

/* mode: "color", "depth" or "alpha". */
SW_API sw_status sw_render_png(const sw_scene *scene, const sw_camera *camera, const char *mode,
                               const char *png_path);
/* Rendered affinity features as an FMAP file. */
SW_API sw_status sw_render_fmap(const sw_scene *scene, const sw_camera *camera,
                                const char *fmap_path);

/* Fits a linear compressor on the teachers of a views manifest. */
SW_API sw_status sw_pca_fit(const char *views_manifest, int output_dim, const char *pca_path);

/* Distils affinities from the views manifest into a copy of `scene`.
 * config_json and pca_path may be NULL; loss_csv receives the per-iteration
 * trace when non-NULL. */
SW_API sw_status sw_train_features(const sw_scene *scene, const char *views_manifest,
                                   const char *config_json, const char *pca_path,
                                   const char *loss_csv, sw_scene **out);

/* Plan manifest: {views: [{id, camera, sky?}]} with paths relative to it.
 * Returns a JSON array of prompt point maps. */
SW_API sw_status sw_plan_prompts(const sw_scene *scene, const char *plan_manifest,
                                 int max_points, char **json_out);

typedef struct sw_prompt_spec {
    const double *points; /* n_points (u, v) pairs */
    size_t n_points;
    double tau;
    /* At most one mask source; all NULL means no mask. */
    const char *mask_png;
    const char *mask_bank;
    const double *polygon; /* n_polygon (u, v) vertices */
    size_t n_polygon;
    const char *id;
} sw_prompt_spec;

/* Zeroes the spec and sets tau to the default of 0.5. */
SW_API void sw_prompt_spec_init(sw_prompt_spec *spec);

SW_API sw_status sw_segment(const sw_scene *scene, const sw_camera *camera,
                            const sw_prompt_spec *spec, sw_segmentation **out);
/* Cuts the selection against the prompt mask; the segmentation then
 * renders and exports the cut Gaussians. */
SW_API sw_status sw_sgc_apply(const sw_scene *scene, sw_segmentation *seg, int samples,
                              double drop_ratio);
SW_API sw_status sw_segmentation_count(const sw_segmentation *seg, size_t *count);
/* Writes min(count, capacity) selected indices. */
SW_API sw_status sw_segmentation_indices(const sw_segmentation *seg, size_t *indices,
                                         size_t capacity);
SW_API sw_status sw_segmentation_json(const sw_segmentation *seg, char **json_out);
SW_API sw_status sw_segmentation_mask_png(const sw_scene *scene, const sw_segmentation *seg,
                                          const sw_camera *camera, const char *png_path);
SW_API sw_status sw_segmentation_export(const sw_scene *scene, const sw_segmentation *seg,
                                        const char *ply_path);
SW_API void sw_segmentation_free(sw_segmentation *seg);

/* force_sgc: -1 keeps each case's flag, 0 or 1 overrides it. csv_path may
 * be NULL. Timing fields are included only when with_timing is nonzero. */
SW_API sw_status sw_eval_run(const char *manifest, int force_sgc, int with_timing,
                             const char *csv_path, char **json_out);

/* spec_json keys: seed, spikes, train, use_sgc, iterations, views, width,
 * height. NULL uses the defaults. */
SW_API sw_status sw_synth_generate(const char *out_dir, const char *spec_json);

/* config_json: server config keys (host, port, data_root, ...); NULL reads
 * the environment. Returns once the socket is bound and serving. */
SW_API sw_status sw_server_start(const char *config_json, sw_server **out);
SW_API int sw_server_port(const sw_server *server);
/* Blocks until the server stops. */
SW_API sw_status sw_server_wait(sw_server *server);
SW_API void sw_server_stop(sw_server *server);
SW_API void sw_server_free(sw_server *server);

#ifdef __cplusplus
}
#endif

#endif /* SEGWILD_H */
