#ifndef BUQO_BUQO_H
#define BUQO_BUQO_H

/*
 * C interface to the BUQO structure-test library.
 *
 * Objects are opaque handles released with their *_free function. Every call
 * returns a buqo_status; on failure buqo_last_error() describes the problem
 * (per thread, valid until the next call on that thread). Strings returned
 * through char** out-parameters are owned by the caller and released with
 * buqo_string_free.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(BUQO_BUILDING_LIBRARY)
#define BUQO_API __attribute__((visibility("default")))
#else
#define BUQO_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum buqo_status {
  BUQO_OK = 0,
  BUQO_ERR_INVALID_ARGUMENT = 1,
  BUQO_ERR_DIMENSION = 2,
  BUQO_ERR_IO = 3,
  BUQO_ERR_NOT_CONVERGED = 4,
  BUQO_ERR_INTERNAL = 5
} buqo_status;

typedef enum buqo_decision {
  BUQO_REJECT_H0 = 0,
  BUQO_CANNOT_REJECT_H0 = 1,
  BUQO_INCONCLUSIVE = 2
} buqo_decision;

typedef struct buqo_image buqo_image;
typedef struct buqo_sinogram buqo_sinogram;
typedef struct buqo_mask buqo_mask;
typedef struct buqo_map_result buqo_map_result;
typedef struct buqo_report buqo_report;

BUQO_API const char *buqo_version(void);
BUQO_API const char *buqo_last_error(void);
BUQO_API const char *buqo_status_name(buqo_status status);
BUQO_API void buqo_string_free(char *s);

/* Images: row-major float64. */
BUQO_API buqo_status buqo_image_create(size_t height, size_t width, const double *values, buqo_image **out);
BUQO_API buqo_status buqo_image_read_rawj(const char *path, buqo_image **out);
BUQO_API buqo_status buqo_image_write_rawj(const buqo_image *img, const char *path);
BUQO_API size_t buqo_image_height(const buqo_image *img);
BUQO_API size_t buqo_image_width(const buqo_image *img);
BUQO_API const double *buqo_image_data(const buqo_image *img);
BUQO_API void buqo_image_free(buqo_image *img);

/* Sinograms: one row of detectors per angle. The RAWJ header may carry "epsilon". */
BUQO_API buqo_status buqo_sinogram_create(size_t angles, size_t detectors, const double *values,
                                          buqo_sinogram **out);
BUQO_API buqo_status buqo_sinogram_read_rawj(const char *path, buqo_sinogram **out, double *epsilon);
BUQO_API buqo_status buqo_sinogram_write_rawj(const buqo_sinogram *y, const char *path, double epsilon);
BUQO_API size_t buqo_sinogram_angles(const buqo_sinogram *y);
BUQO_API size_t buqo_sinogram_detectors(const buqo_sinogram *y);
BUQO_API const double *buqo_sinogram_data(const buqo_sinogram *y);
BUQO_API void buqo_sinogram_free(buqo_sinogram *y);

/* Masks: nonzero bytes are members. */
BUQO_API buqo_status buqo_mask_create(size_t height, size_t width, const uint8_t *membership, buqo_mask **out);
BUQO_API buqo_status buqo_mask_disk(size_t height, size_t width, double row, double col, double radius,
                                    buqo_mask **out);
BUQO_API buqo_status buqo_mask_read_pgm(const char *path, buqo_mask **out);
BUQO_API buqo_status buqo_mask_write_pgm(const buqo_mask *mask, const char *path);
BUQO_API size_t buqo_mask_count(const buqo_mask *mask);
/* Run lengths alternating false/true, starting with a false run. */
BUQO_API buqo_status buqo_mask_rle_encode(const buqo_mask *mask, uint64_t **runs, size_t *count);
BUQO_API void buqo_runs_free(uint64_t *runs);
BUQO_API buqo_status buqo_mask_rle_decode(const uint64_t *runs, size_t count, size_t height, size_t width,
                                          buqo_mask **out);
BUQO_API void buqo_mask_free(buqo_mask *mask);

/* Phantoms are JSON documents (see data/phantom_thorax.json). */
BUQO_API buqo_status buqo_render_phantom(const char *phantom_json, buqo_image **out);
/* Simulates y = Phi x + noise; epsilon receives the noise bound. */
BUQO_API buqo_status buqo_simulate(const char *phantom_json, size_t angles, size_t detectors, double sigma_rel,
                                   uint64_t seed, buqo_image **truth, buqo_sinogram **y, double *epsilon);

typedef struct buqo_solver_options {
  int max_iters;
  double rel_change_tol;
  double feas_tol;
  double step_balance;
  int adaptive_steps;
} buqo_solver_options;

BUQO_API void buqo_solver_options_default(buqo_solver_options *opts);

/* MAP reconstruction on an image_size x image_size grid. psi: "haar3" or "grad".
   opts may be NULL. A run that stops at max_iters still returns a result (check
   buqo_map_result_converged). */
BUQO_API buqo_status buqo_reconstruct(const buqo_sinogram *y, size_t image_size, double epsilon, const char *psi,
                                      const buqo_solver_options *opts, buqo_map_result **out);
BUQO_API const buqo_image *buqo_map_result_image(const buqo_map_result *res);
BUQO_API double buqo_map_result_residual(const buqo_map_result *res);
BUQO_API double buqo_map_result_epsilon(const buqo_map_result *res);
BUQO_API int buqo_map_result_converged(const buqo_map_result *res);
BUQO_API buqo_status buqo_map_result_json(const buqo_map_result *res, char **json);
/* RAWJ image whose header carries the solve metadata. */
BUQO_API buqo_status buqo_map_result_save(const buqo_map_result *res, const char *path);
BUQO_API buqo_status buqo_map_result_load(const char *path, buqo_map_result **out);
BUQO_API void buqo_map_result_free(buqo_map_result *res);

/* Neighborhood statistics and ball parameters of the structure-free set. */
BUQO_API buqo_status buqo_describe_structure(const buqo_image *img, const buqo_mask *mask, size_t ring_width,
                                             char **json);

typedef struct buqo_test_options {
  double alpha;
  double delta;
  size_t ring_width;
  int max_iters;
} buqo_test_options;

BUQO_API void buqo_test_options_default(buqo_test_options *opts);

/* Hypothesis test of the masked structure. y and epsilon must be those the MAP
   result was computed from. opts may be NULL. */
BUQO_API buqo_status buqo_test(const buqo_map_result *map, const buqo_sinogram *y, const buqo_mask *mask,
                               const buqo_test_options *opts, buqo_report **out);
BUQO_API double buqo_report_rho(const buqo_report *rep);
BUQO_API buqo_decision buqo_report_decision(const buqo_report *rep);
BUQO_API buqo_status buqo_report_json(const buqo_report *rep, char **json);
/* which: "x_map", "x_map_s", "x_c", "x_s" or "difference". Borrowed pointer. */
BUQO_API buqo_status buqo_report_image(const buqo_report *rep, const char *which, const buqo_image **out);
/* report.json plus the five images as RAWJ under dir. */
BUQO_API buqo_status buqo_report_write(const buqo_report *rep, const char *dir);
BUQO_API void buqo_report_free(buqo_report *rep);

/* Runs a sweep description and writes sweep.csv, summary.json and cell images.
   verbose != 0 prints one progress line per row to stderr. */
BUQO_API buqo_status buqo_sweep(const char *spec_path, const char *out_dir, int verbose);

/* Serves the probe HTTP API until the process ends. port 0 picks a free port. */
BUQO_API buqo_status buqo_serve(const char *host, int port, const char *data_dir, int workers);

#ifdef __cplusplus
}
#endif

#endif
