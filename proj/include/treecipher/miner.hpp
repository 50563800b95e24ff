#pragma once

#include <optional>
#include <string>
#include <vector>

#include "treecipher/signature.hpp"
#include "treecipher/tree.hpp"

namespace treecipher {

/// Super-tree root label. Data labels colliding with it are escaped on
/// ingestion and unescaped in reports.
extern const char* const kSuperRootLabel;

std::string escape_super_label(const std::string& label);
std::string unescape_super_label(const std::string& label);

/// Super-tree of a dataset: a fresh root whose children are the n trees.
LabeledTree build_super_tree(const std::vector<LabeledTree>& dataset);

struct PatternEntry {
    std::string pattern;  // serialized representative subtree
    int size = 0;
    std::vector<int> origin;  // sorted dataset indices
    double frequency = 0.0;
};

struct PatternReport {
    Relation relation = Relation::Topo;
    double min_support = 0.0;
    int dataset_size = 0;
    std::vector<PatternEntry> entries;  // freq desc, size desc, pattern asc
};

PatternReport mine(const std::vector<LabeledTree>& dataset, Relation relation,
                   double min_support, std::optional<long long> step_limit = std::nullopt);

struct PatternCounts {
    long long topo = 0;
    long long cipher = 0;
    long long label = 0;
};

/// Distinct pattern counts per relation (every vertex except the super-root).
PatternCounts pattern_counts(const std::vector<LabeledTree>& dataset,
                             std::optional<long long> step_limit = std::nullopt);

std::string report_to_json(const PatternReport& r);
std::string report_to_csv(const PatternReport& r);

}  // namespace treecipher
