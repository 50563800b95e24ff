#include <map>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "treecipher/dag.hpp"

using namespace treecipher;

namespace {

// edge multisets keyed by canonical class codes of the repr subtrees, so
// neither vertex numbering nor child storage order matters
std::multiset<std::tuple<int, int, int>> edge_fingerprint(const Dag& d, const LabeledTree& src,
                                                          SignatureRegistry& reg) {
    std::multiset<std::tuple<int, int, int>> out;
    auto code = [&](NodeId repr) {
        return canonical_classes(subtree(src, repr), d.relation, reg).root_code();
    };
    for (const auto& e : d.edges)
        out.insert({code(d.vertices[e.from].repr), code(d.vertices[e.to].repr), e.mult});
    return out;
}

}  // namespace

TEST_CASE("example tree compresses to the expected vertex counts") {
    LabeledTree t = parse_tree(helpers::kExampleTree);
    Dag topo = compress(t, Relation::Topo);
    CHECK(topo.vertices.size() == 4);
    // multiplicities down the chain: 2, 3, 2
    std::vector<int> mults;
    for (const auto& e : topo.edges) mults.push_back(e.mult);
    CHECK(mults == std::vector<int>{2, 3, 2});

    Dag label = compress(t, Relation::Label);
    CHECK(label.vertices.size() == 17);
    CHECK(compress(parse_tree(helpers::kDoublingT1), Relation::Label).vertices.size() == 8);
}

TEST_CASE("single node") {
    Dag d = compress(parse_tree("A"), Relation::Label);
    CHECK(d.vertices.size() == 1);
    CHECK(d.edges.empty());
    DagStats s = dag_stats(d);
    CHECK(s.vertex_count == 1);
    CHECK(s.edge_count == 0);
    CHECK(s.compaction_ratio == doctest::Approx(1.0));
    LabeledTree back = decompress(d);
    CHECK(back.size() == 1);
    CHECK(back.label(0) == "A");
}

TEST_CASE("edge multiplicities sum to the repr's child count") {
    for (int i = 0; i < 25; ++i) {
        LabeledTree t = helpers::random_tree(2 + 2 * i, 0.4, 500 + i);
        for (Relation r : {Relation::Topo, Relation::Label}) {
            Dag d = compress(t, r);
            std::map<int, long long> out_mult;
            for (const auto& e : d.edges) out_mult[e.from] += e.mult;
            for (int v = 0; v < static_cast<int>(d.vertices.size()); ++v)
                CHECK(out_mult[v] == static_cast<long long>(t.children(d.vertices[v].repr).size()));
        }
    }
}

TEST_CASE("decompression restores the class of the input") {
    int label_checked = 0;
    for (int i = 0; i < 1000; ++i) {
        LabeledTree t = helpers::random_tree(1 + i % 50, 0.3 + 0.3 * (i % 3), 7000 + i);
        SignatureRegistry reg;
        Dag topo = compress(t, Relation::Topo);
        LabeledTree t_back = decompress(topo);
        CHECK(canonical_classes(t, Relation::Topo, reg).root_code() ==
              canonical_classes(t_back, Relation::Topo, reg).root_code());
        if (i % 5 == 0) {
            Dag lab = compress(t, Relation::Label);
            LabeledTree l_back = decompress(lab);
            CHECK(canonical_classes(t, Relation::Label, reg).root_code() ==
                  canonical_classes(l_back, Relation::Label, reg).root_code());
            ++label_checked;
        }
    }
    CHECK(label_checked == 200);
}

TEST_CASE("compression is idempotent across a decompression") {
    for (int i = 0; i < 40; ++i) {
        LabeledTree t = helpers::random_tree(2 + i, 0.5, 800 + i);
        Dag d = compress(t, Relation::Label);
        LabeledTree back = decompress(d);
        Dag d2 = compress(back, Relation::Label);
        CHECK(d.vertices.size() == d2.vertices.size());
        SignatureRegistry reg;
        CHECK(edge_fingerprint(d, t, reg) == edge_fingerprint(d2, back, reg));
    }
}

TEST_CASE("outputs are acyclic with a unique source") {
    for (int i = 0; i < 40; ++i) {
        LabeledTree t = helpers::random_tree(1 + i, 0.4, 900 + i);
        Dag d = compress(t, Relation::Topo);
        CHECK(dag_tree_size(d) == t.size());  // also validates shape
        std::vector<int> indeg(d.vertices.size(), 0);
        for (const auto& e : d.edges) indeg[e.to] += e.mult;
        int sources = 0;
        for (int k : indeg) sources += (k == 0);
        CHECK(sources == 1);
    }
}

TEST_CASE("malformed DAGs are rejected") {
    Dag cyc;
    cyc.relation = Relation::Topo;
    cyc.vertices.resize(2);
    cyc.edges = {{0, 1, 1}, {1, 0, 1}};
    cyc.source = 0;
    CHECK_THROWS_AS(decompress(cyc), std::invalid_argument);

    Dag two_sources;
    two_sources.relation = Relation::Topo;
    two_sources.vertices.resize(3);
    two_sources.edges = {{0, 2, 1}, {1, 2, 1}};
    two_sources.source = 0;
    CHECK_THROWS_AS(decompress(two_sources), std::invalid_argument);

    Dag huge;
    huge.relation = Relation::Topo;
    huge.vertices.resize(40);
    for (int i = 0; i + 1 < 40; ++i) huge.edges.push_back({i, i + 1, 100});
    huge.source = 0;
    CHECK_THROWS_AS(decompress(huge), std::invalid_argument);
}

TEST_CASE("DAG JSON round trip") {
    LabeledTree t = parse_tree(helpers::kExampleTree);
    Dag d = compress(t, Relation::Label);
    Dag d2 = dag_from_json(dag_to_json(d));
    CHECK(d2.vertices.size() == d.vertices.size());
    CHECK(d2.edges.size() == d.edges.size());
    CHECK(serialize_tree(decompress(d2)) == serialize_tree(decompress(d)));
    CHECK(dag_to_dot(d).find("->") != std::string::npos);
}
