#pragma once

#include <optional>
#include <string>
#include <vector>

#include "treecipher/signature.hpp"
#include "treecipher/tree.hpp"

namespace treecipher {

/// Classical DAG compression: one vertex per equivalence
/// class of subtrees, multiset edges with multiplicities.
struct Dag {
    struct Vertex {
        int class_code = -1;
        std::optional<std::string> label;  // present iff relation == Label
        NodeId repr = kNoNode;             // section: smallest-preorder class member
    };
    struct Edge {
        int from = -1, to = -1;
        int mult = 1;
    };

    Relation relation = Relation::Topo;
    std::vector<Vertex> vertices;
    std::vector<Edge> edges;
    int source = 0;
};

struct DagStats {
    int vertex_count = 0;
    long long edge_count = 0;  // with multiplicity
    double compaction_ratio = 0.0;
};

Dag compress(const LabeledTree& t, Relation relation);

/// Rebuilds a tree in the class of the compressed one. For topo DAGs every
/// label is the placeholder "·". Throws std::invalid_argument on malformed
/// input (cycle, multiple sources, oversized expansion).
LabeledTree decompress(const Dag& d);

DagStats dag_stats(const Dag& d);

/// Number of source-rooted paths, which equals the source tree's node count.
long long dag_tree_size(const Dag& d);

std::string dag_to_json(const Dag& d);
Dag dag_from_json(std::string_view text);
std::string dag_to_dot(const Dag& d);

}  // namespace treecipher
