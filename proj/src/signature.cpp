#include "treecipher/signature.hpp"

#include <algorithm>
#include <stdexcept>

namespace treecipher {

const char* relation_name(Relation r) {
    switch (r) {
        case Relation::Topo: return "topo";
        case Relation::Label: return "label";
        case Relation::Cipher: return "cipher";
    }
    return "?";
}

Relation relation_from_name(std::string_view name) {
    if (name == "topo") return Relation::Topo;
    if (name == "label") return Relation::Label;
    if (name == "cipher") return Relation::Cipher;
    throw std::invalid_argument("unknown relation: " + std::string(name));
}

std::size_t SignatureRegistry::VecHash::operator()(const std::vector<int>& v) const {
    std::size_t h = 1469598103934665603ull;
    for (int x : v) {
        h ^= static_cast<std::size_t>(x) + 0x9e3779b97f4a7c15ull;
        h *= 1099511628211ull;
    }
    return h;
}

int SignatureRegistry::intern_label(const std::string& label) {
    std::lock_guard<std::mutex> lock(mu_);
    auto [it, _] = labels_.try_emplace(label, static_cast<int>(labels_.size()));
    return it->second;
}

int SignatureRegistry::intern(const std::vector<int>& key) {
    std::lock_guard<std::mutex> lock(mu_);
    auto [it, _] = codes_.try_emplace(key, static_cast<int>(codes_.size()));
    return it->second;
}

SignatureRegistry& default_registry() {
    static SignatureRegistry registry;
    return registry;
}

int CanonicalSignature::distinct_classes() const {
    std::vector<int> v = code;
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return static_cast<int>(v.size());
}

CanonicalSignature canonical_classes(const LabeledTree& t, Relation relation,
                                     SignatureRegistry& registry) {
    if (relation == Relation::Cipher)
        throw std::invalid_argument("canonical classes exist for topo and label relations only");
    CanonicalSignature sig{relation, std::vector<int>(t.size(), -1)};
    // Children always precede their parent in reverse preorder.
    const auto& order = t.preorder();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        NodeId v = *it;
        std::vector<int> key;
        key.reserve(t.children(v).size() + 1);
        if (relation == Relation::Label) key.push_back(registry.intern_label(t.label(v)));
        std::vector<int> child_codes;
        child_codes.reserve(t.children(v).size());
        for (NodeId c : t.children(v)) child_codes.push_back(sig.code[c]);
        std::sort(child_codes.begin(), child_codes.end());
        key.insert(key.end(), child_codes.begin(), child_codes.end());
        // Separate namespaces per relation: prefix with a relation tag.
        key.insert(key.begin(), relation == Relation::Label ? 1 : 0);
        sig.code[v] = registry.intern(key);
    }
    return sig;
}

CanonicalSignature canonical_classes(const LabeledTree& t, Relation relation) {
    return canonical_classes(t, relation, default_registry());
}

bool topo_isomorphic(const LabeledTree& a, const LabeledTree& b) {
    SignatureRegistry reg;
    return canonical_classes(a, Relation::Topo, reg).root_code() ==
           canonical_classes(b, Relation::Topo, reg).root_code();
}

bool label_isomorphic(const LabeledTree& a, const LabeledTree& b) {
    SignatureRegistry reg;
    return canonical_classes(a, Relation::Label, reg).root_code() ==
           canonical_classes(b, Relation::Label, reg).root_code();
}

}  // namespace treecipher
