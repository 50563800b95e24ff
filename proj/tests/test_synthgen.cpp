#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "oracle.hpp"
#include "treecipher/solver.hpp"
#include "treecipher/synthgen.hpp"

using namespace treecipher;

TEST_CASE("single node tree") {
    LabeledTree t = gen_tree(GenSpec{1, 1.0, 9, PairKind::Single});
    CHECK(t.size() == 1);
    CHECK(t.label(0) == "1");
}

TEST_CASE("exact number of distinct labels") {
    LabeledTree t = gen_tree(GenSpec{100, 0.5, 77, PairKind::Single});
    std::set<std::string> labels;
    for (NodeId v = 0; v < t.size(); ++v) labels.insert(t.label(v));
    CHECK(labels.size() == 50);

    LabeledTree u = gen_tree(GenSpec{30, 1.0, 78, PairKind::Single});
    std::set<std::string> all;
    for (NodeId v = 0; v < u.size(); ++v) all.insert(u.label(v));
    CHECK(all.size() == 30);
}

TEST_CASE("same spec twice gives identical trees") {
    GenSpec spec{64, 0.4, 123456, PairKind::Single};
    CHECK(serialize_tree(gen_tree(spec)) == serialize_tree(gen_tree(spec)));
    auto [a1, a2] = gen_iso_pair(GenSpec{40, 0.3, 999, PairKind::IsoPair});
    auto [b1, b2] = gen_iso_pair(GenSpec{40, 0.3, 999, PairKind::IsoPair});
    CHECK(serialize_tree(a1) == serialize_tree(b1));
    CHECK(serialize_tree(a2) == serialize_tree(b2));
}

TEST_CASE("random recursive shape: every non-root attaches to an earlier node") {
    LabeledTree t = gen_tree(GenSpec{200, 0.5, 4242, PairKind::Single});
    for (NodeId v = 1; v < t.size(); ++v) CHECK(t.parent(v) < v);
}

TEST_CASE("iso pairs are labelled-isomorphic, hence ciphering-isomorphic") {
    for (int i = 0; i < 200; ++i) {
        GenSpec spec{1 + i % 50, 0.2 + 0.15 * (i % 5), 80000u + i, PairKind::IsoPair};
        auto [t1, t2] = gen_iso_pair(spec);
        CHECK(label_isomorphic(t1, t2));
    }
    // the solver agrees on a sample
    for (int i = 0; i < 25; ++i) {
        GenSpec spec{5 + i, 0.5, 81000u + i, PairKind::IsoPair};
        auto [t1, t2] = gen_iso_pair(spec);
        CHECK(is_ciphering_isomorphic(t1, t2).verdict == Verdict::Isomorphic);
    }
}

TEST_CASE("iso pair of a single node") {
    auto [t1, t2] = gen_iso_pair(GenSpec{1, 1.0, 5, PairKind::IsoPair});
    CHECK(t1.size() == 1);
    CHECK(t2.size() == 1);
    CHECK(t1.label(0) == t2.label(0));
}

TEST_CASE("shuffling single-child nodes is the identity") {
    // every children list has one element, so the pair is equal node for node
    auto [t1, t2] = gen_iso_pair(GenSpec{2, 1.0, 17, PairKind::IsoPair});
    CHECK(serialize_tree(t1) == serialize_tree(t2));
}

TEST_CASE("non-iso pairs keep the histogram but fail the solver") {
    int produced = 0;
    for (int i = 0; i < 60 && produced < 40; ++i) {
        GenSpec spec{8 + i % 30, 0.4, 82000u + i, PairKind::NonIsoPair};
        auto pair = gen_noniso_pair(spec);
        if (!pair) continue;
        ++produced;
        auto& [t1, t2] = *pair;
        // same topology and same label multiset
        CHECK(topo_isomorphic(t1, t2));
        std::multiset<std::string> h1, h2;
        for (NodeId v = 0; v < t1.size(); ++v) h1.insert(t1.label(v));
        for (NodeId v = 0; v < t2.size(); ++v) h2.insert(t2.label(v));
        CHECK(h1 == h2);
        CHECK(is_ciphering_isomorphic(t1, t2).verdict == Verdict::NotIsomorphic);
    }
    CHECK(produced >= 40);
}

TEST_CASE("small non-iso pairs agree with brute force") {
    for (int i = 0; i < 50; ++i) {
        GenSpec spec{6 + i % 4, 0.5, 83000u + i, PairKind::NonIsoPair};
        auto pair = gen_noniso_pair(spec);
        if (!pair) continue;
        CHECK_FALSE(oracle::ciphering_iso(pair->first, pair->second));
    }
}

TEST_CASE("degenerate label proportions are rejected for non-iso pairs") {
    CHECK_THROWS_AS(gen_noniso_pair(GenSpec{10, 1.0, 1, PairKind::NonIsoPair}),
                    std::invalid_argument);
    CHECK_THROWS_AS(gen_noniso_pair(GenSpec{10, 0.1, 1, PairKind::NonIsoPair}),
                    std::invalid_argument);  // floor(p*n) = 1: single label
    CHECK_THROWS_AS(gen_tree(GenSpec{0, 0.5, 1, PairKind::Single}), std::invalid_argument);
    CHECK_THROWS_AS(gen_tree(GenSpec{5, 1.5, 1, PairKind::Single}), std::invalid_argument);
}

TEST_CASE("resampling wrapper always produces a pair") {
    auto [t1, t2] = gen_noniso_pair_resampling(GenSpec{12, 0.5, 4, PairKind::NonIsoPair});
    CHECK(is_ciphering_isomorphic(t1, t2).verdict == Verdict::NotIsomorphic);
}
