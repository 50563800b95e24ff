#include "treecipher/solver.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <unordered_set>

namespace treecipher {

bool ext_bij(PartialBijection& psi, int a, int b) {
    if (psi.maps(a)) return psi.at(a) == b;
    if (psi.hits(b)) return false;
    psi.fwd[a] = b;
    psi.bwd[b] = a;
    return true;
}

std::vector<int> Collection::supp() const {
    std::vector<int> s;
    for (const auto& p : c1) s.push_back(p.size());
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
}

int Collection::count_n(int side, int n) const {
    const auto& sets = side == 1 ? c1 : c2;
    int k = 0;
    for (const auto& p : sets) k += (p.size() == n);
    return k;
}

bool Collection::balanced() const {
    std::map<int, int> diff;
    for (const auto& p : c1) diff[p.size()]++;
    for (const auto& q : c2) diff[q.size()]--;
    for (auto& [n, d] : diff)
        if (d != 0) return false;
    return true;
}

std::shared_ptr<const PairContext> make_pair_context(const LabeledTree& t1,
                                                     const LabeledTree& t2) {
    auto ctx = std::make_shared<PairContext>();
    ctx->t1 = &t1;
    ctx->t2 = &t2;
    auto intern_side = [](const LabeledTree& t, std::vector<int>& ids,
                          std::vector<std::string>& names) {
        std::unordered_map<std::string, int> table;
        ids.resize(t.size());
        for (NodeId v = 0; v < t.size(); ++v) {
            auto [it, fresh] = table.try_emplace(t.label(v), static_cast<int>(names.size()));
            if (fresh) names.push_back(t.label(v));
            ids[v] = it->second;
        }
    };
    intern_side(t1, ctx->label1, ctx->label_names1);
    intern_side(t2, ctx->label2, ctx->label_names2);
    SignatureRegistry reg;
    ctx->topo1 = canonical_classes(t1, Relation::Topo, reg).code;
    ctx->topo2 = canonical_classes(t2, Relation::Topo, reg).code;
    return ctx;
}

SearchState make_search_state(std::shared_ptr<const PairContext> ctx) {
    SearchState st;
    st.phi = PartialBijection(ctx->t1->size(), ctx->t2->size());
    st.f = PartialBijection(static_cast<int>(ctx->label_names1.size()),
                            static_cast<int>(ctx->label_names2.size()));
    st.loc1.assign(ctx->t1->size(), NodeLoc{});
    st.loc2.assign(ctx->t2->size(), NodeLoc{});
    st.ctx = std::move(ctx);
    return st;
}

void SearchState::sort_side1(std::vector<NodeId>& nodes) const {
    std::sort(nodes.begin(), nodes.end(),
              [&](NodeId a, NodeId b) { return rank1(a) < rank1(b); });
}
void SearchState::sort_side2(std::vector<NodeId>& nodes) const {
    std::sort(nodes.begin(), nodes.end(),
              [&](NodeId a, NodeId b) { return rank2(a) < rank2(b); });
}

int SearchState::add_bag(Bag b) {
    int idx = static_cast<int>(bags.size());
    for (NodeId u : b.b1) loc1[u] = NodeLoc{LocKind::InBag, idx, -1};
    for (NodeId v : b.b2) loc2[v] = NodeLoc{LocKind::InBag, idx, -1};
    bags.push_back(std::move(b));
    return idx;
}

void SearchState::remove_bag(int index) {
    for (NodeId u : bags[index].b1)
        if (loc1[u].kind == LocKind::InBag && loc1[u].container == index) loc1[u] = NodeLoc{};
    for (NodeId v : bags[index].b2)
        if (loc2[v].kind == LocKind::InBag && loc2[v].container == index) loc2[v] = NodeLoc{};
    int last = static_cast<int>(bags.size()) - 1;
    if (index != last) {
        bags[index] = std::move(bags[last]);
        for (NodeId u : bags[index].b1) loc1[u].container = index;
        for (NodeId v : bags[index].b2) loc2[v].container = index;
    }
    bags.pop_back();
}

int SearchState::add_collection(Collection c) {
    int idx = static_cast<int>(collections.size());
    for (int s = 0; s < static_cast<int>(c.c1.size()); ++s)
        for (NodeId u : c.c1[s].nodes) loc1[u] = NodeLoc{LocKind::InCollection, idx, s};
    for (int s = 0; s < static_cast<int>(c.c2.size()); ++s)
        for (NodeId v : c.c2[s].nodes) loc2[v] = NodeLoc{LocKind::InCollection, idx, s};
    collections.push_back(std::move(c));
    return idx;
}

void SearchState::remove_collection(int index) {
    for (const auto& p : collections[index].c1)
        for (NodeId u : p.nodes)
            if (loc1[u].kind == LocKind::InCollection && loc1[u].container == index)
                loc1[u] = NodeLoc{};
    for (const auto& q : collections[index].c2)
        for (NodeId v : q.nodes)
            if (loc2[v].kind == LocKind::InCollection && loc2[v].container == index)
                loc2[v] = NodeLoc{};
    int last = static_cast<int>(collections.size()) - 1;
    if (index != last) {
        collections[index] = std::move(collections[last]);
        for (const auto& p : collections[index].c1)
            for (NodeId u : p.nodes) loc1[u].container = index;
        for (const auto& q : collections[index].c2)
            for (NodeId v : q.nodes) loc2[v].container = index;
    }
    collections.pop_back();
}

namespace {

void reindex_collection_sets(SearchState& st, int ci) {
    Collection& c = st.collections[ci];
    for (int s = 0; s < static_cast<int>(c.c1.size()); ++s)
        for (NodeId u : c.c1[s].nodes) st.loc1[u].set = s;
    for (int s = 0; s < static_cast<int>(c.c2.size()); ++s)
        for (NodeId v : c.c2[s].nodes) st.loc2[v].set = s;
}

void erase_value(std::vector<NodeId>& v, NodeId x) {
    v.erase(std::find(v.begin(), v.end(), x));
}

}  // namespace

bool SearchState::detach_pair(NodeId u, NodeId v) {
    NodeLoc lu = loc1[u], lv = loc2[v];
    if (lu.kind != lv.kind) return false;
    if (lu.kind == LocKind::None) return true;
    if (lu.kind == LocKind::InBag) {
        if (lu.container != lv.container) return false;
        Bag& b = bags[lu.container];
        erase_value(b.b1, u);
        erase_value(b.b2, v);
        loc1[u] = NodeLoc{};
        loc2[v] = NodeLoc{};
        if (b.b1.empty()) remove_bag(lu.container);
        return true;
    }
    // Pulled out of a collection: the leftover set mates become a bag.
    if (lu.container != lv.container) return false;
    Collection& c = collections[lu.container];
    LabeledSet P = c.c1[lu.set];
    LabeledSet Q = c.c2[lv.set];
    if (P.size() != Q.size()) return false;
    int ci = lu.container;
    c.c1.erase(c.c1.begin() + lu.set);
    c.c2.erase(c.c2.begin() + lv.set);
    loc1[u] = NodeLoc{};
    loc2[v] = NodeLoc{};
    erase_value(P.nodes, u);
    erase_value(Q.nodes, v);
    if (c.empty())
        remove_collection(ci);
    else
        reindex_collection_sets(*this, ci);
    if (!P.nodes.empty()) add_bag(Bag{std::move(P.nodes), std::move(Q.nodes)});
    return true;
}

namespace {

BigInt factorial(int n) {
    BigInt r = 1;
    for (int i = 2; i <= n; ++i) r *= i;
    return r;
}

}  // namespace

BigInt search_space_size(const SearchState& st) {
    BigInt n = 1;
    for (const auto& b : st.bags) n *= factorial(b.size());
    for (const auto& c : st.collections) {
        for (int sz : c.supp()) {
            int count = c.count_n(1, sz);
            n *= factorial(count);
            BigInt fn = factorial(sz);
            for (int i = 0; i < count; ++i) n *= fn;
        }
    }
    return n;
}

// ---------------------------------------------------------------------------
// SplitChildren

namespace {

struct SplitJob {
    std::vector<NodeId> s1, s2;
};

bool split_children_impl(SearchState& st, const std::vector<NodeId>& s1,
                         const std::vector<NodeId>& s2, int depth_guard) {
    if (depth_guard <= 0) return false;  // cannot happen on consistent trees
    std::unordered_set<NodeId> cu, cv;
    for (NodeId w : s1)
        for (NodeId c : st.t1().children(w)) cu.insert(c);
    for (NodeId w : s2)
        for (NodeId c : st.t2().children(w)) cv.insert(c);
    if (cu.empty() && cv.empty()) return true;

    std::vector<SplitJob> pending;

    // Bags. Plans are applied in descending index order so swap-pop removal
    // never disturbs a not-yet-applied index.
    struct BagPlan {
        int index;
        std::vector<NodeId> in1, out1, in2, out2;
    };
    std::vector<BagPlan> bag_plans;
    for (int i = 0; i < static_cast<int>(st.bags.size()); ++i) {
        const Bag& b = st.bags[i];
        BagPlan plan{i, {}, {}, {}, {}};
        for (NodeId x : b.b1) (cu.count(x) ? plan.in1 : plan.out1).push_back(x);
        for (NodeId y : b.b2) (cv.count(y) ? plan.in2 : plan.out2).push_back(y);
        if (plan.in1.size() != plan.in2.size()) return false;
        if (plan.in1.empty() || plan.out1.empty()) continue;
        bag_plans.push_back(std::move(plan));
    }
    for (auto it = bag_plans.rbegin(); it != bag_plans.rend(); ++it) {
        st.remove_bag(it->index);
        st.add_bag(Bag{it->in1, it->in2});
        st.add_bag(Bag{it->out1, it->out2});
        pending.push_back(SplitJob{std::move(it->in1), std::move(it->in2)});
        pending.push_back(SplitJob{std::move(it->out1), std::move(it->out2)});
    }

    // Collections, per size class.
    struct CollPlan {
        int index;
        int n;
    };
    std::vector<CollPlan> coll_plans;
    for (int i = 0; i < static_cast<int>(st.collections.size()); ++i)
        for (int n : st.collections[i].supp()) coll_plans.push_back(CollPlan{i, n});
    for (auto it = coll_plans.rbegin(); it != coll_plans.rend(); ++it) {
        Collection& c = st.collections[it->index];
        Collection taken_in, taken_out;
        std::vector<NodeId> acc1, acc1_rest, acc2, acc2_rest;
        auto sweep = [&](std::vector<LabeledSet>& side, const std::unordered_set<NodeId>& hits,
                         std::vector<LabeledSet>& to_in, std::vector<LabeledSet>& to_out,
                         std::vector<NodeId>& acc, std::vector<NodeId>& acc_rest) {
            for (std::size_t s = 0; s < side.size();) {
                if (side[s].size() != it->n) {
                    ++s;
                    continue;
                }
                std::vector<NodeId> in, out;
                for (NodeId x : side[s].nodes) (hits.count(x) ? in : out).push_back(x);
                if (in.empty() || out.empty()) {
                    ++s;
                    continue;
                }
                to_in.push_back(LabeledSet{side[s].label, in});
                to_out.push_back(LabeledSet{side[s].label, out});
                acc.insert(acc.end(), in.begin(), in.end());
                acc_rest.insert(acc_rest.end(), out.begin(), out.end());
                side.erase(side.begin() + s);
            }
        };
        sweep(c.c1, cu, taken_in.c1, taken_out.c1, acc1, acc1_rest);
        sweep(c.c2, cv, taken_in.c2, taken_out.c2, acc2, acc2_rest);
        if (taken_in.c1.empty() && taken_in.c2.empty()) continue;
        if (!taken_in.balanced() || !taken_out.balanced()) return false;
        if (c.empty())
            st.remove_collection(it->index);
        else {
            if (!c.balanced()) return false;
            reindex_collection_sets(st, it->index);
        }
        if (!taken_in.empty()) st.add_collection(std::move(taken_in));
        if (!taken_out.empty()) st.add_collection(std::move(taken_out));
        pending.push_back(SplitJob{std::move(acc1), std::move(acc2)});
        pending.push_back(SplitJob{std::move(acc1_rest), std::move(acc2_rest)});
    }

    for (auto& job : pending)
        if (!split_children_impl(st, job.s1, job.s2, depth_guard - 1)) return false;
    return true;
}

}  // namespace

bool split_children(SearchState& st, const std::vector<NodeId>& s1,
                    const std::vector<NodeId>& s2) {
    return split_children_impl(st, s1, s2, st.t1().size() + 2);
}

// ---------------------------------------------------------------------------
// MapNodes

bool map_nodes(SearchState& st, NodeId u, NodeId v, SearchTrace* trace) {
    if (trace) {
        ++trace->map_nodes_calls_total;
        if (trace->in_deduction) ++trace->map_nodes_calls_deduction;
    }
    if (!ext_bij(st.f, st.ctx->label1[u], st.ctx->label2[v])) return false;
    if (st.phi.maps(u)) return st.phi.at(u) == v;
    if (st.phi.hits(v)) return false;
    if (!st.detach_pair(u, v)) return false;
    st.phi.fwd[u] = v;
    st.phi.bwd[v] = u;
    if (!split_children(st, {u}, {v})) return false;
    bool root1 = st.t1().is_root(u), root2 = st.t2().is_root(v);
    if (root1 || root2) return root1 && root2;
    NodeId pu = st.t1().parent(u), pv = st.t2().parent(v);
    if (st.phi.maps(pu)) return st.phi.at(pu) == pv;
    if (st.phi.hits(pv)) return false;
    return map_nodes(st, pu, pv, trace);
}

// ---------------------------------------------------------------------------
// Deduction rules

namespace {

class GrowthWatch {
public:
    GrowthWatch(SearchState& st, SearchTrace* trace) : st_(st), trace_(trace) {
        if (active()) prev_ = search_space_size(st_);
    }

    bool active() const { return trace_ && trace_->record_snapshots; }

    /// Called after each successful rule application; records a pre/post pair
    /// around any strict growth of the search space.
    void tick() {
        if (!active()) return;
        BigInt cur = search_space_size(st_);
        if (cur > prev_) {
            push(prev_);
            push(cur);
        }
        prev_ = std::move(cur);
    }

private:
    void push(const BigInt& n) {
        auto& snaps = trace_->snapshots;
        if (!snaps.empty() && snaps.back().second == n) return;
        snaps.emplace_back("rules", n);
    }

    SearchState& st_;
    SearchTrace* trace_;
    BigInt prev_;
};

// Rule 1: map every singleton bag.
bool apply_rule1(SearchState& st, SearchTrace* trace, GrowthWatch& gw, bool& changed) {
    for (;;) {
        int found = -1;
        for (int i = 0; i < static_cast<int>(st.bags.size()); ++i)
            if (st.bags[i].size() == 1) {
                found = i;
                break;
            }
        if (found < 0) return true;
        NodeId u = st.bags[found].b1[0], v = st.bags[found].b2[0];
        if (!map_nodes(st, u, v, trace)) return false;
        changed = true;
        if (trace) ++trace->deductions.rule1;
        gw.tick();
    }
}

// Rule 2: separate already-mapped labels from unmapped ones.
bool apply_rule2_once(SearchState& st, SearchTrace* trace, GrowthWatch& gw, bool& applied) {
    for (int i = 0; i < static_cast<int>(st.collections.size()); ++i) {
        Collection& c = st.collections[i];
        for (const auto& seed : c.c1) {
            int a = seed.label;
            if (!st.f.maps(a)) continue;
            int b = st.f.at(a);
            Collection with, without;
            for (const auto& p : c.c1) (p.label == a ? with.c1 : without.c1).push_back(p);
            for (const auto& q : c.c2) (q.label == b ? with.c2 : without.c2).push_back(q);
            if (with.c1.empty() || without.c1.empty()) continue;
            if (!with.balanced() || !without.balanced()) return false;
            st.remove_collection(i);
            st.add_collection(std::move(with));
            st.add_collection(std::move(without));
            applied = true;
            if (trace) ++trace->deductions.rule2;
            gw.tick();
            return true;
        }
    }
    return true;
}

// Rule 3: when one size class is label-unanimous on both sides, map the labels.
bool apply_rule3_once(SearchState& st, SearchTrace* trace, GrowthWatch& gw, bool& applied) {
    for (auto& c : st.collections) {
        for (int n : c.supp()) {
            int a = -2, b = -2;
            for (const auto& p : c.c1)
                if (p.size() == n) a = (a == -2 || a == p.label) ? p.label : -1;
            for (const auto& q : c.c2)
                if (q.size() == n) b = (b == -2 || b == q.label) ? q.label : -1;
            if (a < 0 || b < 0) continue;
            if (st.f.maps(a) || st.f.hits(b)) continue;
            ext_bij(st.f, a, b);
            applied = true;
            if (trace) ++trace->deductions.rule3;
            gw.tick();
            return true;
        }
    }
    return true;
}

// Rule 4: a size class with exactly one set per side becomes a bag.
bool apply_rule4_once(SearchState& st, SearchTrace* trace, GrowthWatch& gw, bool& applied) {
    for (int i = 0; i < static_cast<int>(st.collections.size()); ++i) {
        Collection& c = st.collections[i];
        for (int n : c.supp()) {
            if (c.count_n(1, n) != 1 || c.count_n(2, n) != 1) continue;
            int s1 = -1, s2 = -1;
            for (int s = 0; s < static_cast<int>(c.c1.size()); ++s)
                if (c.c1[s].size() == n) s1 = s;
            for (int s = 0; s < static_cast<int>(c.c2.size()); ++s)
                if (c.c2[s].size() == n) s2 = s;
            if (!ext_bij(st.f, c.c1[s1].label, c.c2[s2].label)) return false;
            Bag bag{c.c1[s1].nodes, c.c2[s2].nodes};
            c.c1.erase(c.c1.begin() + s1);
            c.c2.erase(c.c2.begin() + s2);
            if (c.empty())
                st.remove_collection(i);
            else
                reindex_collection_sets(st, i);
            st.add_bag(std::move(bag));
            applied = true;
            if (trace) ++trace->deductions.rule4;
            gw.tick();
            return true;
        }
    }
    return true;
}

bool rules_fixpoint_impl(SearchState& st, SearchTrace* trace, GrowthWatch& gw) {
    for (;;) {
        bool changed = false;
        if (!apply_rule1(st, trace, gw, changed)) return false;
        bool applied = false;
        if (!apply_rule2_once(st, trace, gw, applied)) return false;
        if (applied) continue;
        if (!apply_rule3_once(st, trace, gw, applied)) return false;
        if (applied) continue;
        if (!apply_rule4_once(st, trace, gw, applied)) return false;
        if (applied) continue;
        if (!changed) return true;
    }
}

}  // namespace

bool rules_fixpoint(SearchState& st, SearchTrace* trace) {
    GrowthWatch gw(st, trace);
    return rules_fixpoint_impl(st, trace, gw);
}

// ---------------------------------------------------------------------------
// Deduction phase: histogram, depth, class and parent splits, then rules

namespace {

void snapshot(SearchTrace* trace, const char* tag, const SearchState& st) {
    if (!trace || !trace->record_snapshots) return;
    BigInt n = search_space_size(st);
    if (!trace->snapshots.empty() && trace->snapshots.back().second == n) return;
    trace->snapshots.emplace_back(tag, std::move(n));
}

using BagKey = std::pair<long long, long long>;

/// Replaces bag `index` by one bag per key value; false on side mismatch.
template <typename K1, typename K2>
bool partition_bag(SearchState& st, int index, K1&& key1, K2&& key2) {
    std::map<BagKey, Bag> groups;
    for (NodeId u : st.bags[index].b1) groups[key1(u)].b1.push_back(u);
    for (NodeId v : st.bags[index].b2) groups[key2(v)].b2.push_back(v);
    for (auto& [k, g] : groups)
        if (g.b1.size() != g.b2.size()) return false;
    if (groups.size() <= 1) return true;
    st.remove_bag(index);
    for (auto& [k, g] : groups) st.add_bag(std::move(g));
    return true;
}

template <typename K1, typename K2>
bool partition_all_bags(SearchState& st, K1&& key1, K2&& key2) {
    // New bags appended by partition_bag are key-homogeneous already, so only
    // the bags present at entry are visited (descending: swap-pop safe).
    for (int i = static_cast<int>(st.bags.size()) - 1; i >= 0; --i)
        if (!partition_bag(st, i, key1, key2)) return false;
    return true;
}

bool rule1_only(SearchState& st, SearchTrace* trace) {
    GrowthWatch gw(st, nullptr);  // bag-only phases cannot grow the space
    bool changed = false;
    return apply_rule1(st, trace, gw, changed);
}

}  // namespace

std::optional<SearchState> deduction_phase(const LabeledTree& t1, const LabeledTree& t2,
                                           SearchTrace* trace) {
    if (trace) trace->in_deduction = true;
    auto ctx = make_pair_context(t1, t2);
    SearchState st = make_search_state(ctx);

    // A. Histogram of labels.
    std::vector<int> occ1(ctx->label_names1.size(), 0), occ2(ctx->label_names2.size(), 0);
    for (int id : ctx->label1) occ1[id]++;
    for (int id : ctx->label2) occ2[id]++;
    std::map<int, int> hist1, hist2;  // occurrence count -> number of labels
    for (int k : occ1) hist1[k]++;
    for (int k : occ2) hist2[k]++;
    if (hist1 != hist2) {
        if (trace) trace->in_deduction = false;
        return std::nullopt;
    }
    for (auto& [n, labels] : hist1) {
        Bag b;
        for (NodeId u = 0; u < t1.size(); ++u)
            if (occ1[ctx->label1[u]] == n) b.b1.push_back(u);
        for (NodeId v = 0; v < t2.size(); ++v)
            if (occ2[ctx->label2[v]] == n) b.b2.push_back(v);
        st.sort_side1(b.b1);
        st.sort_side2(b.b2);
        st.add_bag(std::move(b));
    }
    snapshot(trace, "histogram", st);

    auto fail = [&]() {
        if (trace) trace->in_deduction = false;
        return std::nullopt;
    };

    // B. Depth.
    if (!partition_all_bags(
            st, [&](NodeId u) { return BagKey{0, t1.depth(u)}; },
            [&](NodeId v) { return BagKey{0, t2.depth(v)}; }))
        return fail();
    if (!rule1_only(st, trace)) return fail();
    snapshot(trace, "depth", st);

    // C. Equivalence class.
    if (!partition_all_bags(
            st, [&](NodeId u) { return BagKey{0, ctx->topo1[u]}; },
            [&](NodeId v) { return BagKey{0, ctx->topo2[v]}; }))
        return fail();
    if (!rule1_only(st, trace)) return fail();
    snapshot(trace, "class", st);

    // D. Parents, visiting bags by increasing depth so parent bags are
    // refined before their children's.
    {
        std::vector<std::pair<int, int>> order;  // (depth, bag index)
        for (int i = 0; i < static_cast<int>(st.bags.size()); ++i)
            order.emplace_back(t1.depth(st.bags[i].b1.front()), i);
        std::sort(order.begin(), order.end());
        // Splitting replaces the processed bag; survivors keep their indices
        // because partition_bag removes via swap-pop only when it splits, and
        // the processed bag is re-looked-up through a stable node handle.
        std::vector<NodeId> handles;
        for (auto& [d, i] : order) handles.push_back(st.bags[i].b1.front());
        for (NodeId h : handles) {
            if (st.loc1[h].kind != LocKind::InBag) continue;
            int idx = st.loc1[h].container;
            auto key1 = [&](NodeId u) {
                NodeId p = t1.parent(u);
                if (st.phi.maps(p)) return BagKey{0, st.phi.at(p)};
                return BagKey{1, st.loc1[p].container};
            };
            auto key2 = [&](NodeId v) {
                NodeId p = t2.parent(v);
                if (st.phi.hits(p)) return BagKey{0, p};
                return BagKey{1, st.loc2[p].container};
            };
            if (!partition_bag(st, idx, key1, key2)) return fail();
        }
    }
    if (!rule1_only(st, trace)) return fail();
    snapshot(trace, "parents", st);

    // Conversion of the remaining bags into collections.
    {
        std::vector<Bag> old;
        old.swap(st.bags);
        for (NodeId u = 0; u < t1.size(); ++u)
            if (st.loc1[u].kind == LocKind::InBag) st.loc1[u] = NodeLoc{};
        for (NodeId v = 0; v < t2.size(); ++v)
            if (st.loc2[v].kind == LocKind::InBag) st.loc2[v] = NodeLoc{};
        for (Bag& b : old) {
            Collection c;
            std::map<int, std::vector<NodeId>> by1, by2;
            for (NodeId u : b.b1) by1[st.ctx->label1[u]].push_back(u);
            for (NodeId v : b.b2) by2[st.ctx->label2[v]].push_back(v);
            for (auto& [lab, nodes] : by1) c.c1.push_back(LabeledSet{lab, std::move(nodes)});
            for (auto& [lab, nodes] : by2) c.c2.push_back(LabeledSet{lab, std::move(nodes)});
            if (!c.balanced()) return fail();
            st.add_collection(std::move(c));
        }
    }
    snapshot(trace, "collections", st);

    if (!rules_fixpoint(st, trace)) return fail();
    snapshot(trace, "rules", st);
    if (trace) trace->in_deduction = false;
    return st;
}

// ---------------------------------------------------------------------------
// Backtracking

Candidates next_candidates(const SearchState& st) {
    Candidates out;
    if (!st.bags.empty()) {
        out.kind = Candidates::Kind::Bags;
        int best = 0;
        for (int i = 1; i < static_cast<int>(st.bags.size()); ++i)
            if (st.bags[i].size() < st.bags[best].size()) best = i;
        const Bag& b = st.bags[best];
        out.pivot = *std::min_element(b.b1.begin(), b.b1.end(), [&](NodeId a, NodeId c) {
            return st.rank1(a) < st.rank1(c);
        });
        out.targets = b.b2;
        std::vector<NodeId>& t = out.targets;
        std::sort(t.begin(), t.end(),
                  [&](NodeId a, NodeId c) { return st.rank2(a) < st.rank2(c); });
        return out;
    }
    if (!st.collections.empty()) {
        out.kind = Candidates::Kind::Collections;
        auto min_rank_of_size = [&](const Collection& c, int n) {
            int best = INT32_MAX;
            for (const auto& p : c.c1)
                if (p.size() == n)
                    for (NodeId u : p.nodes) best = std::min(best, st.rank1(u));
            return best;
        };
        int best = -1, best_n = -1, best_count = -1, best_rank = -1;
        for (int i = 0; i < static_cast<int>(st.collections.size()); ++i) {
            const Collection& c = st.collections[i];
            int n = c.supp().back();
            int count = c.count_n(1, n);
            int rank = min_rank_of_size(c, n);
            if (best < 0 || n > best_n || (n == best_n && count < best_count) ||
                (n == best_n && count == best_count && rank < best_rank)) {
                best = i;
                best_n = n;
                best_count = count;
                best_rank = rank;
            }
        }
        const Collection& c = st.collections[best];
        out.collection = best;
        int pivot_rank = INT32_MAX;
        for (int s = 0; s < static_cast<int>(c.c1.size()); ++s) {
            if (c.c1[s].size() != best_n) continue;
            int r = INT32_MAX;
            for (NodeId u : c.c1[s].nodes) r = std::min(r, st.rank1(u));
            if (r < pivot_rank) {
                pivot_rank = r;
                out.set1 = s;
            }
        }
        std::vector<std::pair<int, int>> opts;  // (min rank2, set idx)
        for (int s = 0; s < static_cast<int>(c.c2.size()); ++s) {
            if (c.c2[s].size() != best_n) continue;
            int r = INT32_MAX;
            for (NodeId v : c.c2[s].nodes) r = std::min(r, st.rank2(v));
            opts.emplace_back(r, s);
        }
        std::sort(opts.begin(), opts.end());
        for (auto& [r, s] : opts) out.set2_options.push_back(s);
        return out;
    }
    return out;
}

namespace {

Verdict backtrack_rec(SearchState& st, SearchTrace& trace,
                      const std::optional<long long>& step_limit) {
    ++trace.states_visited;
    if (step_limit && trace.states_visited > *step_limit) return Verdict::Unknown;
    Candidates cand = next_candidates(st);
    if (cand.kind == Candidates::Kind::None) return Verdict::Isomorphic;
    SearchState saved = st;
    if (cand.kind == Candidates::Kind::Bags) {
        for (NodeId v : cand.targets) {
            bool ok = map_nodes(st, cand.pivot, v, &trace) && rules_fixpoint(st, &trace);
            if (ok) {
                Verdict r = backtrack_rec(st, trace, step_limit);
                if (r != Verdict::NotIsomorphic) return r;
            }
            st = saved;
        }
        return Verdict::NotIsomorphic;
    }
    for (int s2 : cand.set2_options) {
        Collection& c = st.collections[cand.collection];
        bool ok = ext_bij(st.f, c.c1[cand.set1].label, c.c2[s2].label);
        if (ok) {
            Bag bag{c.c1[cand.set1].nodes, c.c2[s2].nodes};
            c.c1.erase(c.c1.begin() + cand.set1);
            c.c2.erase(c.c2.begin() + s2);
            if (c.empty())
                st.remove_collection(cand.collection);
            else
                reindex_collection_sets(st, cand.collection);
            st.add_bag(std::move(bag));
            ok = rules_fixpoint(st, &trace);
        }
        if (ok) {
            Verdict r = backtrack_rec(st, trace, step_limit);
            if (r != Verdict::NotIsomorphic) return r;
        }
        st = saved;
    }
    return Verdict::NotIsomorphic;
}

}  // namespace

Verdict backtrack(SearchState& st, SearchTrace& trace, std::optional<long long> step_limit) {
    bool was = trace.record_snapshots;
    trace.record_snapshots = false;
    Verdict v = backtrack_rec(st, trace, step_limit);
    trace.record_snapshots = was;
    return v;
}

const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Isomorphic: return "isomorphic";
        case Verdict::NotIsomorphic: return "not_isomorphic";
        case Verdict::Unknown: return "unknown";
    }
    return "?";
}

IsoResult is_ciphering_isomorphic(const LabeledTree& t1, const LabeledTree& t2,
                                  std::optional<long long> step_limit) {
    IsoResult res;
    if (!topo_isomorphic(t1, t2)) {
        res.verdict = Verdict::NotIsomorphic;
        return res;
    }
    auto state = deduction_phase(t1, t2, &res.trace);
    if (!state) {
        res.verdict = Verdict::NotIsomorphic;
        return res;
    }
    res.verdict = backtrack(*state, res.trace, step_limit);
    if (res.verdict == Verdict::Isomorphic) {
        res.mapping = state->phi.fwd;
        std::vector<std::pair<std::string, std::string>> cipher;
        const auto& ctx = *state->ctx;
        for (std::size_t a = 0; a < ctx.label_names1.size(); ++a)
            if (state->f.fwd[a] != -1)
                cipher.emplace_back(ctx.label_names1[a], ctx.label_names2[state->f.fwd[a]]);
        std::sort(cipher.begin(), cipher.end());
        res.cipher = std::move(cipher);
    }
    return res;
}

bool verify_ciphering(const LabeledTree& t1, const LabeledTree& t2,
                      const std::vector<int>& mapping,
                      const std::unordered_map<std::string, std::string>& cipher) {
    if (t1.size() != t2.size()) return false;
    if (static_cast<int>(mapping.size()) != t1.size()) return false;
    std::vector<int> hit(t2.size(), 0);
    for (NodeId u = 0; u < t1.size(); ++u) {
        int v = mapping[u];
        if (v < 0 || v >= t2.size() || hit[v]++) return false;
    }
    for (NodeId u = 0; u < t1.size(); ++u) {
        NodeId v = mapping[u];
        if (t1.is_root(u) != t2.is_root(v)) return false;
        if (!t1.is_root(u) && mapping[t1.parent(u)] != t2.parent(v)) return false;
        auto it = cipher.find(t1.label(u));
        if (it == cipher.end() || it->second != t2.label(v)) return false;
    }
    // The cipher must be a bijection between the two alphabets.
    auto alpha1 = t1.alphabet();
    if (cipher.size() != alpha1.size()) return false;
    std::unordered_set<std::string> images;
    for (const auto& [a, b] : cipher) {
        if (!images.insert(b).second) return false;
    }
    auto alpha2 = t2.alphabet();
    for (const auto& b : alpha2)
        if (!images.count(b)) return false;
    return true;
}

}  // namespace treecipher
