#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "treecipher/signature.hpp"
#include "treecipher/tree.hpp"

namespace treecipher {

using BigInt = boost::multiprecision::cpp_int;

/// Partial bijection between two dense integer id spaces, with inverse.
struct PartialBijection {
    std::vector<int> fwd, bwd;  // -1 = unset

    PartialBijection() = default;
    PartialBijection(int domain_size, int codomain_size)
        : fwd(domain_size, -1), bwd(codomain_size, -1) {}

    bool maps(int a) const { return fwd[a] != -1; }
    bool hits(int b) const { return bwd[b] != -1; }
    int at(int a) const { return fwd[a]; }
    int pre(int b) const { return bwd[b]; }
    int mapped_count() const {
        int k = 0;
        for (int x : fwd) k += (x != -1);
        return k;
    }
};

/// ExtBij: true (extending if needed) iff psi(a)=b already or both ends free.
bool ext_bij(PartialBijection& psi, int a, int b);

struct Bag {
    std::vector<NodeId> b1, b2;  // sorted by preorder rank of their tree
    int size() const { return static_cast<int>(b1.size()); }
};

/// One same-label node set of a collection side.
struct LabeledSet {
    int label = -1;  // side-local label id
    std::vector<NodeId> nodes;
    int size() const { return static_cast<int>(nodes.size()); }
};

struct Collection {
    std::vector<LabeledSet> c1, c2;
    /// Distinct set sizes present (ascending).
    std::vector<int> supp() const;
    int count_n(int side, int n) const;
    bool balanced() const;  // per-size counts match between sides
    bool empty() const { return c1.empty() && c2.empty(); }
};

/// Immutable per-pair context shared by every snapshot of a solve.
struct PairContext {
    const LabeledTree* t1 = nullptr;
    const LabeledTree* t2 = nullptr;
    std::vector<int> label1, label2;          // per-node side-local label ids
    std::vector<std::string> label_names1, label_names2;
    std::vector<int> topo1, topo2;            // per-node topo class codes (shared registry)
};

enum class LocKind : uint8_t { None, InBag, InCollection };

struct NodeLoc {
    LocKind kind = LocKind::None;
    int container = -1;
    int set = -1;  // set index for collections
};

struct DeductionCounts {
    long long rule1 = 0, rule2 = 0, rule3 = 0, rule4 = 0;
};

struct SearchTrace {
    std::vector<std::pair<std::string, BigInt>> snapshots;
    long long states_visited = 0;
    DeductionCounts deductions;
    long long map_nodes_calls_deduction = 0;
    long long map_nodes_calls_total = 0;
    bool in_deduction = false;
    bool record_snapshots = true;
};

/// The solver's mutable state: the two partial bijections plus the partition
/// of unmapped nodes into bags and collections. Copy = deep snapshot.
struct SearchState {
    std::shared_ptr<const PairContext> ctx;
    PartialBijection phi;  // nodes of t1 -> nodes of t2
    PartialBijection f;    // label ids of t1 -> label ids of t2
    std::vector<Bag> bags;
    std::vector<Collection> collections;
    std::vector<NodeLoc> loc1, loc2;

    const LabeledTree& t1() const { return *ctx->t1; }
    const LabeledTree& t2() const { return *ctx->t2; }
    int rank1(NodeId u) const { return ctx->t1->preorder_rank()[u]; }
    int rank2(NodeId v) const { return ctx->t2->preorder_rank()[v]; }

    int add_bag(Bag b);
    void remove_bag(int index);
    int add_collection(Collection c);
    void remove_collection(int index);
    void sort_side1(std::vector<NodeId>& nodes) const;
    void sort_side2(std::vector<NodeId>& nodes) const;

    /// Removes the freshly mapped pair (u, v) from its container, enforcing
    /// that both sit in compatible positions. Creates the residual bag when
    /// the pair is pulled out of a collection.
    bool detach_pair(NodeId u, NodeId v);
};

SearchState make_search_state(std::shared_ptr<const PairContext> ctx);
std::shared_ptr<const PairContext> make_pair_context(const LabeledTree& t1,
                                                     const LabeledTree& t2);

/// Exact number of completions of phi compatible with the current system.
BigInt search_space_size(const SearchState& st);

/// MapNodes: extends f and phi with (u, v), splits the children apart and
/// recursively maps parents. false = the current system is inconsistent.
bool map_nodes(SearchState& st, NodeId u, NodeId v, SearchTrace* trace = nullptr);

/// SplitChildren on the node sets s1/s2 (the just-associated sets).
bool split_children(SearchState& st, const std::vector<NodeId>& s1,
                    const std::vector<NodeId>& s2);

/// Deduction rules 1-4 applied round-robin to fixpoint.
bool rules_fixpoint(SearchState& st, SearchTrace* trace);

/// Deduction pipeline: label-histogram, depth, class and parent splits,
/// conversion to collections, then the rules fixpoint.
/// Precondition: t1 and t2 are topologically isomorphic.
std::optional<SearchState> deduction_phase(const LabeledTree& t1, const LabeledTree& t2,
                                           SearchTrace* trace = nullptr);

struct Candidates {
    enum class Kind { None, Bags, Collections } kind = Kind::None;
    // Bag case: pivot node of t1 plus the t2-side options.
    NodeId pivot = kNoNode;
    std::vector<NodeId> targets;
    // Collection case: (collection, pivot set, t2-side set options).
    int collection = -1;
    int set1 = -1;
    std::vector<int> set2_options;
};

Candidates next_candidates(const SearchState& st);

enum class Verdict { Isomorphic, NotIsomorphic, Unknown };
const char* verdict_name(Verdict v);

struct IsoResult {
    Verdict verdict = Verdict::Unknown;
    std::optional<std::vector<int>> mapping;  // t1 node -> t2 node
    std::optional<std::vector<std::pair<std::string, std::string>>> cipher;
    SearchTrace trace;
};

/// Depth-first exploration of the remaining search space.
/// step_limit counts backtracking states entered; deductions are never limited.
Verdict backtrack(SearchState& st, SearchTrace& trace,
                  std::optional<long long> step_limit = std::nullopt);

IsoResult is_ciphering_isomorphic(const LabeledTree& t1, const LabeledTree& t2,
                                  std::optional<long long> step_limit = std::nullopt);

bool verify_ciphering(const LabeledTree& t1, const LabeledTree& t2,
                      const std::vector<int>& mapping,
                      const std::unordered_map<std::string, std::string>& cipher);

}  // namespace treecipher
