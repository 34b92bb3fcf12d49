#include <math.h>
#include <stdio.h>
#include <string.h>
#include "topicflow.h"

#define CHECK(cond) do { if (!(cond)) { fprintf(stderr, "failed: %s (line %d)\n", #cond, __LINE__); return 1; } } while (0)

int main(void) {
    TnGraph *g = tn_graph_new(false);
    size_t idx[6];
    const char *labels[6] = {"a", "b", "c", "d", "e", "f"};
    for (int i = 0; i < 6; i++) CHECK(tn_graph_add_node(g, labels[i], &idx[i]) == TN_STATUS_OK);
    size_t edges[6][2] = {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}};
    for (int i = 0; i < 6; i++) CHECK(tn_graph_add_edge(g, edges[i][0], edges[i][1], 1.0) == TN_STATUS_OK);

    size_t assignment[6] = {0, 0, 0, 1, 1, 1};
    double q = 0.0;
    CHECK(tn_modularity(g, assignment, 6, &q) == TN_STATUS_OK);
    CHECK(fabs(q - 0.5) < 1e-12);

    TnPartition *p = NULL;
    CHECK(tn_louvain(g, 42, &p) == TN_STATUS_OK);
    CHECK(tn_partition_community_count(p) == 2);
    size_t c0, c3;
    CHECK(tn_partition_community_of(p, 0, &c0) == TN_STATUS_OK);
    CHECK(tn_partition_community_of(p, 3, &c3) == TN_STATUS_OK);
    CHECK(c0 != c3);
    CHECK(tn_partition_community_of(p, 99, &c0) == TN_STATUS_INVALID_ARGUMENT);
    CHECK(tn_last_error() != NULL);
    tn_partition_free(p);

    CHECK(tn_graph_add_node(g, "a", &idx[0]) == TN_STATUS_GRAPH_ERROR);
    tn_graph_free(g);

    const char *sa[2] = {"x", "y"};
    const char *sb[2] = {"y", "z"};
    double j = 0.0;
    CHECK(tn_jaccard(sa, 2, sb, 2, &j) == TN_STATUS_OK);
    CHECK(fabs(j - 1.0 / 3.0) < 1e-15);

    CHECK(strlen(tn_version()) > 0);
    puts("ok");
    return 0;
}
