#ifndef COW_CENTERLINE_H
#define COW_CENTERLINE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CowStatus {
  COW_STATUS_OK = 0,
  COW_STATUS_NULL_POINTER = 1,
  COW_STATUS_INVALID_ARGUMENT = 2,
  COW_STATUS_PARSE_ERROR = 3,
  COW_STATUS_STAGE_ERROR = 4,
  COW_STATUS_IO_ERROR = 5,
  COW_STATUS_PANIC = 6,
} CowStatus;

/**
 * A processed case: centerline graph, nodes, variants and features.
 */
typedef struct CowGraph CowGraph;

/**
 * A labeled segmentation mask.
 */
typedef struct CowVolume CowVolume;

/**
 * Message for the last failed call on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *cow_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *cow_version(void);

/**
 * Read a NIfTI-1 label mask.
 *
 * # Safety
 * `path` is a NUL-terminated string; `out` is valid for one pointer write.
 */
enum CowStatus cow_volume_read_nifti(const char *path, struct CowVolume **out);

/**
 * Build a mask from x-fastest label codes.
 *
 * # Safety
 * `dims` and `spacing` point to 3 values each; `labels` points to `len`
 * bytes; `out` is valid for one pointer write.
 */
enum CowStatus cow_volume_from_labels(const size_t *dims,
                                      const double *spacing,
                                      const uint8_t *labels,
                                      size_t len,
                                      struct CowVolume **out);

/**
 * Grid dimensions of a mask.
 *
 * # Safety
 * `v` is a live handle; `dims` is valid for 3 writes.
 */
enum CowStatus cow_volume_dims(const struct CowVolume *v, size_t *dims);

/**
 * # Safety
 * `v` is null or a handle not yet freed.
 */
void cow_volume_free(struct CowVolume *v);

/**
 * Run the full pipeline on a mask. `config_toml` may be null for the
 * defaults.
 *
 * # Safety
 * `v` is a live handle; `config_toml` is null or NUL-terminated; `out` is
 * valid for one pointer write.
 */
enum CowStatus cow_pipeline_run(const struct CowVolume *v,
                                const char *config_toml,
                                struct CowGraph **out);

/**
 * # Safety
 * `g` is a live handle; `out` is valid for one write.
 */
enum CowStatus cow_graph_node_count(const struct CowGraph *g, size_t *out);

/**
 * # Safety
 * `g` is a live handle; `out` is valid for one write.
 */
enum CowStatus cow_graph_edge_count(const struct CowGraph *g, size_t *out);

/**
 * Segment label of edge `index`.
 *
 * # Safety
 * `g` is a live handle; `out` is valid for one write.
 */
enum CowStatus cow_graph_edge_label(const struct CowGraph *g, size_t index, uint8_t *out);

/**
 * # Safety
 * See [`cow_graph_edge_count`]; free the string with [`cow_string_free`].
 */
enum CowStatus cow_graph_nodes_json(const struct CowGraph *g, char **out);

/**
 * # Safety
 * See [`cow_graph_edge_count`]; free the string with [`cow_string_free`].
 */
enum CowStatus cow_graph_variants_json(const struct CowGraph *g, char **out);

/**
 * # Safety
 * See [`cow_graph_edge_count`]; free the string with [`cow_string_free`].
 */
enum CowStatus cow_graph_features_json(const struct CowGraph *g, char **out);

/**
 * Write graph.vtk, nodes.json, variants.json, features.json and
 * skeleton.nii into `dir`, creating it if needed.
 *
 * # Safety
 * `g` is a live handle; `dir` is NUL-terminated.
 */
enum CowStatus cow_graph_write_bundle(const struct CowGraph *g, const char *dir);

/**
 * # Safety
 * `g` is null or a handle not yet freed.
 */
void cow_graph_free(struct CowGraph *g);

/**
 * # Safety
 * `s` is null or a string returned by this library, not yet freed.
 */
void cow_string_free(char *s);

/**
 * Exponent x with r_p^x = r_c1^x + r_c2^x.
 *
 * # Safety
 * `out` is valid for one write.
 */
enum CowStatus cow_bifurcation_exponent(double r_p, double r_c1, double r_c2, double *out);

#endif  /* COW_CENTERLINE_H */
