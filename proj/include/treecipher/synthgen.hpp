#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <utility>

#include "treecipher/tree.hpp"

namespace treecipher {

enum class PairKind { Single, IsoPair, NonIsoPair };
const char* pair_kind_name(PairKind k);
PairKind pair_kind_from_name(std::string_view name);

/// Random-instance parameters: size, target proportion of distinct labels,
/// and the 64-bit seed. Labels are "1".."N" with N = max(floor(p*n), 1).
struct GenSpec {
    int n = 1;
    double p = 1.0;
    std::uint64_t seed = 0;
    PairKind pair_kind = PairKind::Single;

    int distinct_labels() const;
    void validate() const;  // throws std::invalid_argument
};

/// Random recursive tree: node i+1 attaches to a uniformly random earlier
/// node. Exactly N distinct labels occur. Deterministic under (spec, seed):
/// mt19937_64 streams are derived per purpose with splitmix64, and bounded
/// draws use the raw 64-bit output modulo the bound.
LabeledTree gen_tree(const GenSpec& spec);

/// (T1, T2) with T2 a child-shuffled, preorder-renumbered copy of T1;
/// guarantees T1 ≃_l T2, hence T1 ~ T2.
std::pair<LabeledTree, LabeledTree> gen_iso_pair(const GenSpec& spec);

/// (T1, T2) sharing the topology, the node→label assignment shuffled so the
/// label histogram is preserved; retries until the solver rejects the pair.
/// nullopt after max_retries (caller resamples T1 with another seed).
std::optional<std::pair<LabeledTree, LabeledTree>> gen_noniso_pair(const GenSpec& spec,
                                                                   int max_retries = 64);

/// Resamples T1 across derived seeds until a non-isomorphic pair is found.
std::pair<LabeledTree, LabeledTree> gen_noniso_pair_resampling(GenSpec spec,
                                                               int max_attempts = 64);

namespace rng {
std::uint64_t splitmix64(std::uint64_t& state);
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t purpose);
std::uint64_t below(std::mt19937_64& gen, std::uint64_t bound);
}  // namespace rng

}  // namespace treecipher
