#ifndef TOPICFLOW_H
#define TOPICFLOW_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum TnStatus {
  TN_STATUS_OK = 0,
  TN_STATUS_NULL_POINTER = 1,
  TN_STATUS_INVALID_ARGUMENT = 2,
  TN_STATUS_GRAPH_ERROR = 3,
  // Correlation undefined: constant or too short input.
  TN_STATUS_UNDEFINED = 4,
  TN_STATUS_PIPELINE_INPUT = 5,
  TN_STATUS_PIPELINE_INTERNAL = 6,
  TN_STATUS_PANIC = 7,
} TnStatus;

// Opaque weighted graph.
typedef struct TnGraph TnGraph;

// Opaque node-to-community assignment.
typedef struct TnPartition TnPartition;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failure on this thread, or null. Valid until the
// next call into this library from the same thread.
const char *tn_last_error(void);

// Static, NUL-terminated library version.
const char *tn_version(void);

// New empty graph; null only on allocation failure.
struct TnGraph *tn_graph_new(bool directed);

// # Safety
// `g` must come from [`tn_graph_new`] and not be freed already; null is ignored.
void tn_graph_free(struct TnGraph *g);

// Adds a node with a unique label and writes its index.
//
// # Safety
// `g` must be a live graph, `label` a NUL-terminated string and
// `out_index` writable.
enum TnStatus tn_graph_add_node(struct TnGraph *g, const char *label, size_t *out_index);

// Adds an edge with a positive finite weight.
//
// # Safety
// `g` must be a live graph.
enum TnStatus tn_graph_add_edge(struct TnGraph *g, size_t u, size_t v, double weight);

// # Safety
// `g` must be a live graph or null (yields 0).
size_t tn_graph_node_count(const struct TnGraph *g);

// # Safety
// `g` must be a live graph or null (yields 0).
size_t tn_graph_edge_count(const struct TnGraph *g);

// Modularity of the partition given by `assignment[node] = community`.
//
// # Safety
// `g` must be a live graph, `assignment` must hold `len` values and `out`
// must be writable.
enum TnStatus tn_modularity(const struct TnGraph *g,
                            const size_t *assignment,
                            size_t len,
                            double *out);

// Louvain communities of an undirected graph.
//
// # Safety
// `g` must be a live graph and `out` writable; on success `*out` owns a
// partition to release with [`tn_partition_free`].
enum TnStatus tn_louvain(const struct TnGraph *g, uint64_t seed, struct TnPartition **out);

// # Safety
// `p` must come from [`tn_louvain`] and not be freed already; null is ignored.
void tn_partition_free(struct TnPartition *p);

// # Safety
// `p` must be a live partition or null (yields 0).
size_t tn_partition_len(const struct TnPartition *p);

// # Safety
// `p` must be a live partition or null (yields 0).
size_t tn_partition_community_count(const struct TnPartition *p);

// Community ids are dense, numbered by first appearance.
//
// # Safety
// `p` must be a live partition and `out` writable.
enum TnStatus tn_partition_community_of(const struct TnPartition *p, size_t node, size_t *out);

// Pearson correlation of two length-`n` vectors.
//
// # Safety
// `x` and `y` must each hold `n` values; `out` must be writable.
enum TnStatus tn_pearson(const double *x, const double *y, size_t n, double *out);

// Jaccard similarity of two string sets; duplicates count once.
//
// # Safety
// `a` and `b` must hold `na` and `nb` NUL-terminated strings; `out` must
// be writable.
enum TnStatus tn_jaccard(const char *const *a,
                         size_t na,
                         const char *const *b,
                         size_t nb,
                         double *out);

// Runs the whole pipeline from a JSON configuration and writes the
// artifact directory path. Partial artifacts stay on failure.
//
// # Safety
// `config_json` must be a NUL-terminated string and `out_dir` writable; on
// success `*out_dir` must be released with [`tn_string_free`].
enum TnStatus tn_run_pipeline(const char *config_json, char **out_dir);

// # Safety
// `s` must come from this library and not be freed already; null is ignored.
void tn_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TOPICFLOW_H */
