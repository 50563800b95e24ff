#pragma once

#include <mutex>
#include <unordered_map>
#include <vector>

#include "treecipher/tree.hpp"

namespace treecipher {

enum class Relation { Topo, Label, Cipher };

const char* relation_name(Relation r);
Relation relation_from_name(std::string_view name);

/// Hash-consing registry for canonical subtree encodings. Codes are
/// comparable across every tree interned through the same registry.
/// Interning is mutex-guarded, so a registry may be shared across threads.
class SignatureRegistry {
public:
    int intern_label(const std::string& label);
    /// key = sorted child codes, prefixed by the label code for Relation::Label.
    int intern(const std::vector<int>& key);

private:
    struct VecHash {
        std::size_t operator()(const std::vector<int>& v) const;
    };
    std::mutex mu_;
    std::unordered_map<std::string, int> labels_;
    std::unordered_map<std::vector<int>, int, VecHash> codes_;
};

/// Process-wide registry backing the convenience overloads below.
SignatureRegistry& default_registry();

struct CanonicalSignature {
    Relation relation;
    std::vector<int> code;  // per node
    int root_code() const { return code[0]; }
    int distinct_classes() const;
};

CanonicalSignature canonical_classes(const LabeledTree& t, Relation relation,
                                     SignatureRegistry& registry);
CanonicalSignature canonical_classes(const LabeledTree& t, Relation relation);

/// Root-code equality through a shared (fresh) registry.
bool topo_isomorphic(const LabeledTree& a, const LabeledTree& b);
bool label_isomorphic(const LabeledTree& a, const LabeledTree& b);

}  // namespace treecipher
