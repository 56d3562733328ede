#include "buqo/buqo.h"

#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

static int failures = 0;

#define CHECK(cond)                                                                                                    \
  do {                                                                                                                 \
    if (!(cond)) {                                                                                                     \
      fprintf(stderr, "%s:%d: CHECK(%s) failed; last error: %s\n", __FILE__, __LINE__, #cond, buqo_last_error());   \
      ++failures;                                                                                                      \
    }                                                                                                                  \
  } while (0)

static const char *kPhantom =
    "{\"size\": 24, \"ellipses\": ["
    "{\"cx\": 12, \"cy\": 12, \"a\": 10, \"b\": 9, \"angle\": 0, \"intensity\": 0.2},"
    "{\"cx\": 12, \"cy\": 10, \"a\": 6, \"b\": 5, \"angle\": 0, \"intensity\": 0.7}],"
    "\"embolus\": {\"cx\": 12, \"cy\": 10, \"radius\": 2.5, \"intensity\": 0.2}}";

static void test_errors(void) {
  buqo_image *img = NULL;
  CHECK(buqo_image_create(2, 2, NULL, NULL) == BUQO_ERR_INVALID_ARGUMENT);
  CHECK(strlen(buqo_last_error()) > 0);
  CHECK(buqo_image_create(2, 2, NULL, &img) == BUQO_OK);
  CHECK(img && buqo_image_data(img)[3] == 0.0);
  buqo_image_free(img);
  img = NULL;
  CHECK(buqo_image_read_rawj("/nonexistent/x", &img) == BUQO_ERR_IO);
  CHECK(buqo_render_phantom("{not json", &img) == BUQO_ERR_INVALID_ARGUMENT);
  CHECK(strcmp(buqo_status_name(BUQO_ERR_DIMENSION), "dimension-mismatch") == 0);
  CHECK(strlen(buqo_version()) > 0);

  buqo_mask *m = NULL;
  const uint64_t runs[] = {2, 2};
  CHECK(buqo_mask_rle_decode(runs, 2, 2, 3, &m) == BUQO_ERR_INVALID_ARGUMENT);
  CHECK(m == NULL);
}

static void test_containers(const char *dir) {
  double v[6] = {1, 2, 3, 4, 5, 6};
  buqo_image *img = NULL;
  CHECK(buqo_image_create(2, 3, v, &img) == BUQO_OK);
  CHECK(buqo_image_height(img) == 2 && buqo_image_width(img) == 3);
  char path[1024];
  snprintf(path, sizeof path, "%s/img", dir);
  CHECK(buqo_image_write_rawj(img, path) == BUQO_OK);
  buqo_image *back = NULL;
  CHECK(buqo_image_read_rawj(path, &back) == BUQO_OK);
  CHECK(back && memcmp(buqo_image_data(back), v, sizeof v) == 0);
  buqo_image_free(back);
  buqo_image_free(img);

  buqo_mask *disk = NULL;
  CHECK(buqo_mask_disk(10, 10, 5, 5, 1, &disk) == BUQO_OK);
  CHECK(buqo_mask_count(disk) == 5);
  uint64_t *runs = NULL;
  size_t n = 0;
  CHECK(buqo_mask_rle_encode(disk, &runs, &n) == BUQO_OK);
  buqo_mask *decoded = NULL;
  CHECK(buqo_mask_rle_decode(runs, n, 10, 10, &decoded) == BUQO_OK);
  CHECK(buqo_mask_count(decoded) == 5);
  snprintf(path, sizeof path, "%s/mask.pgm", dir);
  CHECK(buqo_mask_write_pgm(disk, path) == BUQO_OK);
  buqo_mask *read = NULL;
  CHECK(buqo_mask_read_pgm(path, &read) == BUQO_OK);
  CHECK(buqo_mask_count(read) == 5);
  buqo_runs_free(runs);
  buqo_mask_free(read);
  buqo_mask_free(decoded);
  buqo_mask_free(disk);
}

static void test_pipeline(const char *dir) {
  buqo_image *truth = NULL;
  buqo_sinogram *y = NULL;
  double eps = 0.0;
  CHECK(buqo_simulate(kPhantom, 40, 36, 0.01, 3, &truth, &y, &eps) == BUQO_OK);
  CHECK(eps > 0.0);
  CHECK(buqo_sinogram_angles(y) == 40 && buqo_sinogram_detectors(y) == 36);

  char path[1024];
  snprintf(path, sizeof path, "%s/y", dir);
  CHECK(buqo_sinogram_write_rawj(y, path, eps) == BUQO_OK);
  buqo_sinogram *y2 = NULL;
  double eps2 = 0.0;
  CHECK(buqo_sinogram_read_rawj(path, &y2, &eps2) == BUQO_OK);
  CHECK(eps2 == eps);
  CHECK(memcmp(buqo_sinogram_data(y2), buqo_sinogram_data(y), 40 * 36 * sizeof(double)) == 0);
  buqo_sinogram_free(y2);

  buqo_map_result *map = NULL;
  CHECK(buqo_reconstruct(y, 24, eps, "haar3", NULL, &map) == BUQO_OK);
  CHECK(buqo_reconstruct(y, 24, eps, "db4", NULL, &map) == BUQO_ERR_INVALID_ARGUMENT);
  CHECK(buqo_reconstruct(y, 24, -1.0, "haar3", NULL, &map) == BUQO_ERR_INVALID_ARGUMENT);
  CHECK(map != NULL);
  if (!map)
    return;
  CHECK(buqo_map_result_converged(map));
  CHECK(buqo_map_result_residual(map) <= eps * (1 + 1e-4));
  CHECK(buqo_map_result_epsilon(map) == eps);
  char *js = NULL;
  CHECK(buqo_map_result_json(map, &js) == BUQO_OK);
  CHECK(js && strstr(js, "\"converged\"") != NULL);
  buqo_string_free(js);

  snprintf(path, sizeof path, "%s/x_map", dir);
  CHECK(buqo_map_result_save(map, path) == BUQO_OK);
  buqo_map_result *loaded = NULL;
  CHECK(buqo_map_result_load(path, &loaded) == BUQO_OK);
  CHECK(loaded && memcmp(buqo_image_data(buqo_map_result_image(loaded)), buqo_image_data(buqo_map_result_image(map)),
                         24 * 24 * sizeof(double)) == 0);

  buqo_mask *mask = NULL;
  CHECK(buqo_mask_disk(24, 24, 9.5, 11.5, 2.5, &mask) == BUQO_OK);
  char *desc = NULL;
  CHECK(buqo_describe_structure(buqo_map_result_image(map), mask, 3, &desc) == BUQO_OK);
  CHECK(desc && strstr(desc, "r_pix") != NULL);
  buqo_string_free(desc);

  buqo_test_options topts;
  buqo_test_options_default(&topts);
  CHECK(topts.alpha == 0.01);
  CHECK(topts.delta == 0.001);
  CHECK(topts.ring_width == 3);
  buqo_report *rep = NULL;
  CHECK(buqo_test(loaded, y, mask, &topts, &rep) == BUQO_OK);
  if (rep) {
    const double rho = buqo_report_rho(rep);
    CHECK(rho >= 0.0 && rho <= 1.0 + 1e-6);
    const buqo_decision d = buqo_report_decision(rep);
    CHECK(d == BUQO_REJECT_H0 || d == BUQO_CANNOT_REJECT_H0 || d == BUQO_INCONCLUSIVE);
    const buqo_image *xc = NULL;
    CHECK(buqo_report_image(rep, "x_c", &xc) == BUQO_OK);
    CHECK(xc && buqo_image_height(xc) == 24);
    CHECK(buqo_report_image(rep, "nope", &xc) == BUQO_ERR_INVALID_ARGUMENT);
    char *rj = NULL;
    CHECK(buqo_report_json(rep, &rj) == BUQO_OK);
    CHECK(rj && strstr(rj, "\"rho\"") != NULL);
    buqo_string_free(rj);
    snprintf(path, sizeof path, "%s/report", dir);
    CHECK(buqo_report_write(rep, path) == BUQO_OK);
    snprintf(path, sizeof path, "%s/report/difference", dir);
    buqo_image *diff = NULL;
    CHECK(buqo_image_read_rawj(path, &diff) == BUQO_OK);
    buqo_image_free(diff);
    buqo_report_free(rep);
  }

  buqo_mask *wrong = NULL;
  CHECK(buqo_mask_disk(20, 20, 5, 5, 2, &wrong) == BUQO_OK);
  rep = NULL;
  CHECK(buqo_test(map, y, wrong, NULL, &rep) == BUQO_ERR_DIMENSION);
  CHECK(rep == NULL);

  buqo_mask_free(wrong);
  buqo_mask_free(mask);
  buqo_map_result_free(loaded);
  buqo_map_result_free(map);
  buqo_sinogram_free(y);
  buqo_image_free(truth);
}

int main(int argc, char **argv) {
  if (argc < 2) {
    fprintf(stderr, "usage: %s SCRATCH_DIR\n", argv[0]);
    return 2;
  }
  test_errors();
  test_containers(argv[1]);
  test_pipeline(argv[1]);
  buqo_image_free(NULL);
  buqo_mask_free(NULL);
  if (failures) {
    fprintf(stderr, "%d check(s) failed\n", failures);
    return 1;
  }
  printf("C API: all checks passed\n");
  return 0;
}
