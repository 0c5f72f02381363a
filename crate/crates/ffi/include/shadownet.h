#ifndef SHADOWNET_H
#define SHADOWNET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SnStatus {
  SN_STATUS_OK = 0,
  SN_STATUS_NULL_POINTER = 1,
  SN_STATUS_INVALID_UTF8 = 2,
  SN_STATUS_PARSE = 3,
  SN_STATUS_VALIDATE = 4,
  SN_STATUS_IO = 5,
  SN_STATUS_PARAMS = 6,
  SN_STATUS_SHAPE = 7,
  SN_STATUS_UNPRICED = 8,
  SN_STATUS_SELECTOR_MISS = 9,
  SN_STATUS_MISSING_WEIGHTS = 10,
  SN_STATUS_FORMAT = 11,
  SN_STATUS_PROTOCOL = 12,
  SN_STATUS_TRANSPORT = 13,
  SN_STATUS_BUFFER_TOO_SMALL = 14,
  SN_STATUS_PANIC = 15,
} SnStatus;

/**
 * A per-layer cost report.
 */
typedef struct SnCostReport SnCostReport;

/**
 * A parsed, validated network graph.
 */
typedef struct SnGraph SnGraph;

/**
 * A set of named weight tensors.
 */
typedef struct SnWeights SnWeights;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Description of the last failure on this thread; empty after success.
 * The pointer stays valid until the next call on this thread.
 */
const char *sn_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sn_version(void);

void sn_string_free(char *s);

/**
 * Parse a graph from JSON text.
 */
enum SnStatus sn_graph_from_json(const char *json, struct SnGraph **out);

/**
 * Read and parse a graph file.
 */
enum SnStatus sn_graph_load(const char *path, struct SnGraph **out);

void sn_graph_free(struct SnGraph *graph);

enum SnStatus sn_graph_layer_count(const struct SnGraph *graph, size_t *out);

/**
 * Serialize a graph to JSON. Free the result with [`sn_string_free`].
 */
enum SnStatus sn_graph_to_json(const struct SnGraph *graph, char **out);

/**
 * Apply one rewrite pass such as `pa_replace(second,0.5)`, producing a
 * new graph. A pass that matches nothing yields `SN_STATUS_SELECTOR_MISS`.
 */
enum SnStatus sn_graph_rewrite(const struct SnGraph *graph, const char *pass, struct SnGraph **out);

/**
 * Price every layer with ring width `bits` and comparison field `field`.
 */
enum SnStatus sn_cost_analyze(const struct SnGraph *graph,
                              uint32_t bits,
                              uint64_t field,
                              struct SnCostReport **out);

void sn_cost_free(struct SnCostReport *report);

enum SnStatus sn_cost_total_rounds(const struct SnCostReport *report, uint64_t *out);

enum SnStatus sn_cost_total_bits(const struct SnCostReport *report, double *out);

/**
 * Total communication in MB (10^6 bytes).
 */
enum SnStatus sn_cost_total_mb(const struct SnCostReport *report, double *out);

/**
 * The report as JSON. The string is owned by the report.
 */
enum SnStatus sn_cost_json(const struct SnCostReport *report, const char **out);

/**
 * Random weights for every parametric layer of `graph`.
 */
enum SnStatus sn_weights_generate(const struct SnGraph *graph,
                                  uint64_t seed,
                                  struct SnWeights **out);

enum SnStatus sn_weights_load(const char *path, struct SnWeights **out);

enum SnStatus sn_weights_save(const struct SnWeights *weights, const char *path);

void sn_weights_free(struct SnWeights *weights);

/**
 * Run `graph` securely with all three parties in this process, using the
 * default ring (64 bits, 13 fractional bits).
 *
 * `input` holds the graph's input tensor in row-major HWC order. The
 * decoded output is written to `output` (capacity `output_cap`) and its
 * length to `output_len`; if the buffer is too small the call fails with
 * `SN_STATUS_BUFFER_TOO_SMALL` after setting `output_len`. `rounds` and
 * `bytes` receive the measured totals and may be null.
 */
enum SnStatus sn_secure_run(const struct SnGraph *graph,
                            const struct SnWeights *weights,
                            const float *input,
                            size_t input_len,
                            uint64_t seed,
                            double *output,
                            size_t output_cap,
                            size_t *output_len,
                            uint64_t *rounds,
                            uint64_t *bytes);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHADOWNET_H */
