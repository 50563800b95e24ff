#include "treecipher/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "treecipher/solver.hpp"

namespace treecipher {

const char* pair_kind_name(PairKind k) {
    switch (k) {
        case PairKind::Single: return "single";
        case PairKind::IsoPair: return "iso";
        case PairKind::NonIsoPair: return "noniso";
    }
    return "?";
}

PairKind pair_kind_from_name(std::string_view name) {
    if (name == "single") return PairKind::Single;
    if (name == "iso") return PairKind::IsoPair;
    if (name == "noniso") return PairKind::NonIsoPair;
    throw std::invalid_argument("unknown pair kind: " + std::string(name));
}

namespace rng {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t purpose) {
    std::uint64_t s = seed ^ (0x6a09e667f3bcc909ull * (purpose + 1));
    return std::mt19937_64(splitmix64(s));
}

std::uint64_t below(std::mt19937_64& gen, std::uint64_t bound) {
    return bound ? gen() % bound : 0;
}

}  // namespace rng

namespace {

enum Purpose : std::uint64_t { kTopology = 1, kLabelPick = 2, kLabelFill = 3,
                               kShuffle = 4, kRelabel = 5 };

}  // namespace

int GenSpec::distinct_labels() const {
    return std::max(static_cast<int>(std::floor(p * n)), 1);
}

void GenSpec::validate() const {
    if (n < 1) throw std::invalid_argument("tree size must be >= 1");
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("label proportion must be in [0, 1]");
    if (pair_kind == PairKind::NonIsoPair) {
        int N = distinct_labels();
        if (N < 2 || N >= n)
            throw std::invalid_argument(
                "non-isomorphic pairs need 2 <= floor(p*n) <= n-1; with one label or all "
                "labels distinct every isomorphism is a ciphering");
    }
}

LabeledTree gen_tree(const GenSpec& spec) {
    spec.validate();
    const int n = spec.n;
    auto topo = rng::stream(spec.seed, kTopology);
    std::vector<TreeNode> nodes(n);
    for (int i = 1; i < n; ++i) {
        int parent = static_cast<int>(rng::below(topo, i));
        nodes[i].parent = parent;
        nodes[parent].children.push_back(i);
    }

    const int N = spec.distinct_labels();
    // N forced nodes get labels "1".."N"; the rest draw uniformly.
    std::vector<int> forced(n);
    for (int i = 0; i < n; ++i) forced[i] = i;
    auto pick = rng::stream(spec.seed, kLabelPick);
    for (int i = 0; i < N; ++i) {
        int j = i + static_cast<int>(rng::below(pick, n - i));
        std::swap(forced[i], forced[j]);
    }
    std::vector<int> label_of(n, -1);
    for (int i = 0; i < N; ++i) label_of[forced[i]] = i;
    auto fill = rng::stream(spec.seed, kLabelFill);
    for (int i = 0; i < n; ++i)
        if (label_of[i] < 0) label_of[i] = static_cast<int>(rng::below(fill, N));
    for (int i = 0; i < n; ++i) nodes[i].label = std::to_string(label_of[i] + 1);
    return LabeledTree(std::move(nodes));
}

namespace {

LabeledTree shuffle_children(const LabeledTree& t, std::mt19937_64& gen) {
    // Permute each children list, then renumber in preorder of the new order.
    std::vector<std::vector<NodeId>> kids(t.size());
    for (NodeId v = 0; v < t.size(); ++v) {
        kids[v] = t.children(v);
        for (int i = static_cast<int>(kids[v].size()) - 1; i > 0; --i) {
            int j = static_cast<int>(rng::below(gen, i + 1));
            std::swap(kids[v][i], kids[v][j]);
        }
    }
    std::vector<TreeNode> nodes;
    nodes.reserve(t.size());
    std::vector<std::pair<NodeId, NodeId>> stack{{t.root(), kNoNode}};
    while (!stack.empty()) {
        auto [orig, parent] = stack.back();
        stack.pop_back();
        NodeId id = static_cast<NodeId>(nodes.size());
        nodes.push_back(TreeNode{t.label(orig), parent, {}});
        if (parent != kNoNode) nodes[parent].children.push_back(id);
        for (auto it = kids[orig].rbegin(); it != kids[orig].rend(); ++it)
            stack.emplace_back(*it, id);
    }
    return LabeledTree(std::move(nodes));
}

}  // namespace

std::pair<LabeledTree, LabeledTree> gen_iso_pair(const GenSpec& spec) {
    spec.validate();
    LabeledTree t1 = gen_tree(spec);
    auto gen = rng::stream(spec.seed, kShuffle);
    LabeledTree t2 = shuffle_children(t1, gen);
    return {std::move(t1), std::move(t2)};
}

std::optional<std::pair<LabeledTree, LabeledTree>> gen_noniso_pair(const GenSpec& spec,
                                                                   int max_retries) {
    GenSpec s = spec;
    s.pair_kind = PairKind::NonIsoPair;
    s.validate();
    LabeledTree t1 = gen_tree(s);
    auto gen = rng::stream(s.seed, kRelabel);
    const int n = t1.size();
    for (int attempt = 0; attempt < max_retries; ++attempt) {
        std::vector<int> perm(n);
        for (int i = 0; i < n; ++i) perm[i] = i;
        for (int i = n - 1; i > 0; --i) {
            int j = static_cast<int>(rng::below(gen, i + 1));
            std::swap(perm[i], perm[j]);
        }
        std::vector<TreeNode> nodes(n);
        for (NodeId v = 0; v < n; ++v) {
            nodes[v] = t1.node(v);
            nodes[v].label = t1.label(perm[v]);
        }
        LabeledTree t2{std::move(nodes)};
        if (is_ciphering_isomorphic(t1, t2).verdict == Verdict::NotIsomorphic)
            return std::make_pair(std::move(t1), std::move(t2));
    }
    return std::nullopt;
}

std::pair<LabeledTree, LabeledTree> gen_noniso_pair_resampling(GenSpec spec, int max_attempts) {
    for (int k = 0; k < max_attempts; ++k) {
        auto pair = gen_noniso_pair(spec);
        if (pair) return std::move(*pair);
        spec.seed = spec.seed * 0x100000001b3ull + 0x9e3779b9ull;
    }
    throw std::runtime_error("could not build a non-isomorphic pair for this spec");
}

}  // namespace treecipher
