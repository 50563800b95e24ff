#include "treecipher/dag.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"

namespace treecipher {

namespace {

constexpr long long kMaxExpandedNodes = 100'000'000;
constexpr const char* kTopoPlaceholder = "·";  // "·"

}  // namespace

Dag compress(const LabeledTree& t, Relation relation) {
    if (relation == Relation::Cipher)
        throw std::invalid_argument("cipher relation is compressed by compress_rw");
    SignatureRegistry reg;
    CanonicalSignature sig = canonical_classes(t, relation, reg);

    Dag d;
    d.relation = relation;
    std::unordered_map<int, int> vertex_of_code;
    // Preorder scan: the first node seen per class is the smallest-preorder
    // representative, and the root's class becomes vertex 0.
    for (NodeId v : t.preorder()) {
        int code = sig.code[v];
        if (vertex_of_code.count(code)) continue;
        int idx = static_cast<int>(d.vertices.size());
        vertex_of_code[code] = idx;
        Dag::Vertex vx;
        vx.class_code = code;
        vx.repr = v;
        if (relation == Relation::Label) vx.label = t.label(v);
        d.vertices.push_back(std::move(vx));
    }
    d.source = 0;
    for (int i = 0; i < static_cast<int>(d.vertices.size()); ++i) {
        std::map<int, int> mult;  // child vertex -> multiplicity
        for (NodeId c : t.children(d.vertices[i].repr)) mult[vertex_of_code[sig.code[c]]]++;
        for (auto& [to, m] : mult) d.edges.push_back(Dag::Edge{i, to, m});
    }
    return d;
}

namespace {

struct DagShape {
    std::vector<std::vector<std::pair<int, int>>> out;  // vertex -> (to, mult)
    std::vector<int> indeg;
};

DagShape shape_of(const Dag& d) {
    const int n = static_cast<int>(d.vertices.size());
    DagShape s;
    s.out.resize(n);
    s.indeg.assign(n, 0);
    for (const auto& e : d.edges) {
        if (e.from < 0 || e.from >= n || e.to < 0 || e.to >= n || e.mult < 1)
            throw std::invalid_argument("DAG edge out of range");
        s.out[e.from].emplace_back(e.to, e.mult);
        s.indeg[e.to] += e.mult;
    }
    return s;
}

void check_single_source_acyclic(const Dag& d, const DagShape& s) {
    const int n = static_cast<int>(d.vertices.size());
    if (n == 0) throw std::invalid_argument("DAG has no vertices");
    int sources = 0;
    for (int i = 0; i < n; ++i) sources += (s.indeg[i] == 0);
    if (sources != 1 || s.indeg[d.source] != 0)
        throw std::invalid_argument("DAG must have a unique source");
    // cycle check: DFS with colors
    std::vector<int> color(n, 0);
    std::vector<std::pair<int, std::size_t>> stack{{d.source, 0}};
    color[d.source] = 1;
    while (!stack.empty()) {
        auto& [v, i] = stack.back();
        if (i == s.out[v].size()) {
            color[v] = 2;
            stack.pop_back();
            continue;
        }
        int to = s.out[v][i++].first;
        if (color[to] == 1) throw std::invalid_argument("DAG contains a cycle");
        if (color[to] == 0) {
            color[to] = 1;
            stack.emplace_back(to, 0);
        }
    }
}

long long expanded_size(const Dag& d, const DagShape& s) {
    const int n = static_cast<int>(d.vertices.size());
    std::vector<long long> size(n, -1);
    // vertices in reverse topological order via repeated relaxation
    std::vector<int> order;
    std::vector<int> indeg_v(n, 0);
    for (int v = 0; v < n; ++v)
        for (auto& [to, m] : s.out[v]) indeg_v[to]++;
    std::vector<int> q;
    for (int v = 0; v < n; ++v)
        if (indeg_v[v] == 0) q.push_back(v);
    while (!q.empty()) {
        int v = q.back();
        q.pop_back();
        order.push_back(v);
        for (auto& [to, m] : s.out[v])
            if (--indeg_v[to] == 0) q.push_back(to);
    }
    if (static_cast<int>(order.size()) != n)
        throw std::invalid_argument("DAG contains a cycle");
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        long long total = 1;
        for (auto& [to, m] : s.out[*it]) {
            total += static_cast<long long>(m) * size[to];
            if (size[to] < 0 || total > kMaxExpandedNodes)
                throw std::invalid_argument("DAG expands beyond supported size");
        }
        size[*it] = total;
    }
    return size[d.source];
}

void expand(const Dag& d, const DagShape& s, std::vector<TreeNode>& nodes) {
    std::vector<std::pair<int, NodeId>> stack{{d.source, kNoNode}};  // (vertex, parent node)
    while (!stack.empty()) {
        auto [vertex, parent] = stack.back();
        stack.pop_back();
        NodeId id = static_cast<NodeId>(nodes.size());
        std::string label = d.relation == Relation::Label ? d.vertices[vertex].label.value_or("")
                                                          : kTopoPlaceholder;
        nodes.push_back(TreeNode{std::move(label), parent, {}});
        if (parent != kNoNode) nodes[parent].children.push_back(id);
        const auto& out = s.out[vertex];
        for (auto it = out.rbegin(); it != out.rend(); ++it)
            for (int k = 0; k < it->second; ++k) stack.emplace_back(it->first, id);
    }
}

}  // namespace

LabeledTree decompress(const Dag& d) {
    DagShape s = shape_of(d);
    check_single_source_acyclic(d, s);
    expanded_size(d, s);
    std::vector<TreeNode> nodes;
    expand(d, s, nodes);
    return LabeledTree(std::move(nodes));
}

long long dag_tree_size(const Dag& d) {
    DagShape s = shape_of(d);
    check_single_source_acyclic(d, s);
    return expanded_size(d, s);
}

DagStats dag_stats(const Dag& d) {
    DagStats st;
    st.vertex_count = static_cast<int>(d.vertices.size());
    for (const auto& e : d.edges) st.edge_count += e.mult;
    st.compaction_ratio = static_cast<double>(st.vertex_count) /
                          static_cast<double>(dag_tree_size(d));
    return st;
}

std::string dag_to_json(const Dag& d) {
    nlohmann::json j;
    j["relation"] = relation_name(d.relation);
    j["source"] = d.source;
    auto& vs = j["vertices"] = nlohmann::json::array();
    for (int i = 0; i < static_cast<int>(d.vertices.size()); ++i) {
        nlohmann::json v;
        v["id"] = i;
        v["repr"] = d.vertices[i].repr;
        if (d.vertices[i].label) v["label"] = *d.vertices[i].label;
        vs.push_back(std::move(v));
    }
    auto& es = j["edges"] = nlohmann::json::array();
    for (const auto& e : d.edges)
        es.push_back({{"from", e.from}, {"to", e.to}, {"mult", e.mult}});
    return j.dump(2);
}

Dag dag_from_json(std::string_view text) {
    nlohmann::json j = nlohmann::json::parse(text);
    Dag d;
    d.relation = relation_from_name(j.at("relation").get<std::string>());
    d.source = j.at("source").get<int>();
    for (const auto& v : j.at("vertices")) {
        Dag::Vertex vx;
        vx.repr = v.value("repr", -1);
        if (v.contains("label")) vx.label = v.at("label").get<std::string>();
        d.vertices.push_back(std::move(vx));
    }
    for (const auto& e : j.at("edges"))
        d.edges.push_back(Dag::Edge{e.at("from").get<int>(), e.at("to").get<int>(),
                                    e.at("mult").get<int>()});
    return d;
}

std::string dag_to_dot(const Dag& d) {
    std::string out = "digraph dag {\n";
    for (int i = 0; i < static_cast<int>(d.vertices.size()); ++i) {
        out += "  n" + std::to_string(i) + " [label=\"";
        out += d.vertices[i].label ? *d.vertices[i].label : std::to_string(i);
        out += "\"];\n";
    }
    for (const auto& e : d.edges) {
        out += "  n" + std::to_string(e.from) + " -> n" + std::to_string(e.to);
        out += " [label=\"" + std::to_string(e.mult) + "\"];\n";
    }
    out += "}\n";
    return out;
}

}  // namespace treecipher
