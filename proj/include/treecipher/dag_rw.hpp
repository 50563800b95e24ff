#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "treecipher/tree.hpp"

namespace treecipher {

/// Label bijection attached to a DAG-RW edge. Identity carries no table: it
/// maps every label of the pointed subtree to itself.
struct Cipher {
    enum class Kind { Identity, Table } kind = Kind::Identity;
    std::vector<std::pair<std::string, std::string>> table;  // sorted by source label

    bool is_identity() const { return kind == Kind::Identity; }
    static Cipher identity() { return Cipher{}; }
    static Cipher from_table(std::vector<std::pair<std::string, std::string>> entries);
};

/// DAG-RW: one vertex per tree-ciphering class, one edge per child occurrence
/// under a section node, each edge carrying the witness cipher.
struct DagRw {
    struct Vertex {
        std::string label;          // label of the section node
        NodeId section = kNoNode;   // representative node in the source tree
    };
    struct Edge {
        int from = -1, to = -1;
        Cipher cipher;
    };

    std::vector<Vertex> vertices;
    std::vector<Edge> edges;
    int source = 0;
};

struct RwStats {
    int vertex_count = 0;
    long long edge_count = 0;
    long long cipher_payload = 0;  // total explicit table entries
    long long identity_edge_count = 0;
};

/// Compression by top-down refinement of the topological DAG. When
/// step_limit_per_test is set, an Unknown
/// verdict from a pairwise ciphering test is treated as "not equivalent",
/// which may yield a larger (still lossless) DAG.
/// vertex_of_node, when given, receives the vertex index of every node the
/// construction classified (the root and all children of section nodes; -1
/// elsewhere).
DagRw compress_rw(const LabeledTree& t,
                  std::optional<long long> step_limit_per_test = std::nullopt,
                  std::vector<int>* vertex_of_node = nullptr);

/// Exact reconstruction: topology from the multigraph, labels by composing
/// edge ciphers along source-rooted paths. Throws std::invalid_argument on
/// malformed input (cycle, multiple sources, cipher domain mismatch).
LabeledTree decompress_rw(const DagRw& d);

RwStats rw_stats(const DagRw& d);

/// Number of source-rooted paths = node count of the original tree.
long long rw_tree_size(const DagRw& d);

std::string dag_rw_to_json(const DagRw& d);
DagRw dag_rw_from_json(std::string_view text);
std::string dag_rw_to_dot(const DagRw& d);

}  // namespace treecipher
