#include "treecipher/miner.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "treecipher/dag.hpp"
#include "treecipher/dag_rw.hpp"

namespace treecipher {

const char* const kSuperRootLabel = "⊤";  // "⊤"

std::string escape_super_label(const std::string& label) {
    // Labels made of ⊤ repetitions gain one more ⊤; everything else unchanged.
    const std::string top = kSuperRootLabel;
    if (label.empty() || label.size() % top.size() != 0) return label;
    for (std::size_t i = 0; i < label.size(); i += top.size())
        if (label.compare(i, top.size(), top) != 0) return label;
    return label + top;
}

std::string unescape_super_label(const std::string& label) {
    const std::string top = kSuperRootLabel;
    if (label.size() < 2 * top.size() || label.size() % top.size() != 0) return label;
    for (std::size_t i = 0; i < label.size(); i += top.size())
        if (label.compare(i, top.size(), top) != 0) return label;
    return label.substr(0, label.size() - top.size());
}

LabeledTree build_super_tree(const std::vector<LabeledTree>& dataset) {
    if (dataset.empty()) throw std::invalid_argument("dataset must not be empty");
    std::vector<TreeNode> nodes;
    nodes.push_back(TreeNode{kSuperRootLabel, kNoNode, {}});
    for (const LabeledTree& t : dataset) {
        int base = static_cast<int>(nodes.size());
        nodes[0].children.push_back(base);
        for (NodeId v = 0; v < t.size(); ++v) {
            TreeNode n;
            n.label = escape_super_label(t.label(v));
            n.parent = v == 0 ? 0 : t.parent(v) + base;
            for (NodeId c : t.children(v)) n.children.push_back(c + base);
            nodes.push_back(std::move(n));
        }
    }
    return LabeledTree(std::move(nodes));
}

namespace {

struct CompressedView {
    int source = 0;
    int vertex_count = 0;
    std::vector<std::pair<int, int>> edges;  // per occurrence
    std::vector<NodeId> section;             // vertex -> representative node
};

/// origin(q) = init(q) ∪ ⋃ origin(p) over edges (p, q), one top-down pass.
std::vector<std::set<int>> propagate_origins(const CompressedView& cv,
                                             const std::vector<int>& root_vertex, int n) {
    std::vector<std::set<int>> origin(cv.vertex_count);
    for (int i = 0; i < n; ++i) origin[root_vertex[i]].insert(i);
    std::vector<int> indeg(cv.vertex_count, 0);
    std::vector<std::vector<int>> out(cv.vertex_count);
    for (auto& [a, b] : cv.edges) {
        out[a].push_back(b);
        indeg[b]++;
    }
    std::vector<int> queue{cv.source};
    std::vector<int> order;
    while (!queue.empty()) {
        int v = queue.back();
        queue.pop_back();
        order.push_back(v);
        std::map<int, int> cnt;
        for (int b : out[v]) cnt[b]++;
        for (auto& [b, k] : cnt)
            if ((indeg[b] -= k) == 0) queue.push_back(b);
    }
    for (int v : order)
        for (int b : out[v]) origin[b].insert(origin[v].begin(), origin[v].end());
    return origin;
}

}  // namespace

PatternReport mine(const std::vector<LabeledTree>& dataset, Relation relation,
                   double min_support, std::optional<long long> step_limit) {
    if (dataset.empty()) throw std::invalid_argument("dataset must not be empty");
    if (min_support <= 0.0 || min_support > 1.0)
        throw std::invalid_argument("min_support must be in (0, 1]");
    const int n = static_cast<int>(dataset.size());
    LabeledTree super = build_super_tree(dataset);

    CompressedView cv;
    std::vector<int> root_vertex(n, -1);
    if (relation == Relation::Cipher) {
        std::vector<int> vertex_of_node;
        DagRw d = compress_rw(super, step_limit, &vertex_of_node);
        cv.source = d.source;
        cv.vertex_count = static_cast<int>(d.vertices.size());
        for (const auto& e : d.edges) cv.edges.emplace_back(e.from, e.to);
        for (const auto& vx : d.vertices) cv.section.push_back(vx.section);
        // Dataset roots are children of the super-root section, so every one
        // of them was classified by the compressor.
        for (int i = 0; i < n; ++i)
            root_vertex[i] = vertex_of_node[super.children(super.root())[i]];
    } else {
        Dag d = compress(super, relation);
        cv.source = d.source;
        cv.vertex_count = static_cast<int>(d.vertices.size());
        for (const auto& e : d.edges)
            for (int k = 0; k < e.mult; ++k) cv.edges.emplace_back(e.from, e.to);
        for (const auto& vx : d.vertices) cv.section.push_back(vx.repr);
        SignatureRegistry reg;
        auto codes = canonical_classes(super, relation, reg).code;
        std::map<int, int> vertex_of_code;
        for (int v = 0; v < static_cast<int>(d.vertices.size()); ++v)
            vertex_of_code[codes[d.vertices[v].repr]] = v;
        for (int i = 0; i < n; ++i)
            root_vertex[i] = vertex_of_code.at(codes[super.children(super.root())[i]]);
    }

    auto origin = propagate_origins(cv, root_vertex, n);

    PatternReport report;
    report.relation = relation;
    report.min_support = min_support;
    report.dataset_size = n;
    for (int v = 0; v < cv.vertex_count; ++v) {
        if (v == cv.source) continue;
        double freq = static_cast<double>(origin[v].size()) / n;
        if (freq < min_support) continue;
        LabeledTree rep = relabel(subtree(super, cv.section[v]), [&](const std::string& l) {
            return relation == Relation::Topo ? std::string("·") : unescape_super_label(l);
        });
        PatternEntry e;
        e.pattern = serialize_tree(rep);
        e.size = rep.size();
        e.origin.assign(origin[v].begin(), origin[v].end());
        e.frequency = freq;
        report.entries.push_back(std::move(e));
    }
    std::sort(report.entries.begin(), report.entries.end(),
              [](const PatternEntry& a, const PatternEntry& b) {
                  if (a.frequency != b.frequency) return a.frequency > b.frequency;
                  if (a.size != b.size) return a.size > b.size;
                  return a.pattern < b.pattern;
              });
    return report;
}

PatternCounts pattern_counts(const std::vector<LabeledTree>& dataset,
                             std::optional<long long> step_limit) {
    if (dataset.empty()) throw std::invalid_argument("dataset must not be empty");
    LabeledTree super = build_super_tree(dataset);
    PatternCounts c;
    c.topo = static_cast<long long>(compress(super, Relation::Topo).vertices.size()) - 1;
    c.label = static_cast<long long>(compress(super, Relation::Label).vertices.size()) - 1;
    c.cipher = static_cast<long long>(compress_rw(super, step_limit).vertices.size()) - 1;
    return c;
}

std::string report_to_json(const PatternReport& r) {
    nlohmann::json j;
    j["relation"] = relation_name(r.relation);
    j["min_support"] = r.min_support;
    j["data"] = r.dataset_size;
    auto& es = j["entries"] = nlohmann::json::array();
    for (const auto& e : r.entries)
        es.push_back({{"pattern", e.pattern},
                      {"size", e.size},
                      {"frequency", e.frequency},
                      {"origin", e.origin}});
    return j.dump(2);
}

std::string report_to_csv(const PatternReport& r) {
    std::string out = "pattern,size,frequency,origin_count\n";
    for (const auto& e : r.entries) {
        std::string quoted = "\"";
        for (char ch : e.pattern) {
            if (ch == '"')
                quoted += "\"\"";
            else
                quoted.push_back(ch);
        }
        quoted += "\"";
        out += quoted + "," + std::to_string(e.size) + "," + std::to_string(e.frequency) + "," +
               std::to_string(e.origin.size()) + "\n";
    }
    return out;
}

}  // namespace treecipher
