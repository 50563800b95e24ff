#include "treecipher/dag_rw.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "treecipher/signature.hpp"
#include "treecipher/solver.hpp"

namespace treecipher {

Cipher Cipher::from_table(std::vector<std::pair<std::string, std::string>> entries) {
    std::sort(entries.begin(), entries.end());
    bool id = true;
    for (const auto& [a, b] : entries) id &= (a == b);
    if (id) return identity();
    Cipher c;
    c.kind = Kind::Table;
    c.table = std::move(entries);
    return c;
}

namespace {

constexpr long long kMaxExpandedNodes = 100'000'000;

/// Witness cipher from T(rep) to T(other); nullopt when not ~-equivalent.
std::optional<Cipher> ciphering_witness(const LabeledTree& t, NodeId rep, NodeId other,
                                        const std::vector<int>& label_code,
                                        std::optional<long long> step_limit) {
    if (rep == other) return Cipher::identity();
    if (label_code[rep] == label_code[other]) return Cipher::identity();
    LabeledTree a = subtree(t, rep);
    LabeledTree b = subtree(t, other);
    IsoResult r = is_ciphering_isomorphic(a, b, step_limit);
    if (r.verdict != Verdict::Isomorphic) return std::nullopt;
    return Cipher::from_table(*r.cipher);
}

}  // namespace

DagRw compress_rw(const LabeledTree& t, std::optional<long long> step_limit_per_test,
                  std::vector<int>* vertex_of_node) {
    if (vertex_of_node) vertex_of_node->assign(t.size(), -1);
    SignatureRegistry reg;
    std::vector<int> topo = canonical_classes(t, Relation::Topo, reg).code;
    std::vector<int> label_code = canonical_classes(t, Relation::Label, reg).code;

    // Topo classes ordered parents-before-children: decreasing subtree height,
    // ties by first preorder appearance.
    std::unordered_map<int, int> first_seen;
    std::vector<int> class_codes;
    for (NodeId v : t.preorder())
        if (first_seen.try_emplace(topo[v], static_cast<int>(class_codes.size())).second)
            class_codes.push_back(topo[v]);
    std::vector<int> height(t.size(), 0);
    const auto& order = t.preorder();
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        for (NodeId c : t.children(*it)) height[*it] = std::max(height[*it], height[c] + 1);
    std::unordered_map<int, int> class_height;
    for (NodeId v = 0; v < t.size(); ++v) class_height[topo[v]] = height[v];
    std::sort(class_codes.begin(), class_codes.end(), [&](int a, int b) {
        if (class_height[a] != class_height[b]) return class_height[a] > class_height[b];
        return first_seen[a] < first_seen[b];
    });

    DagRw d;
    std::unordered_map<NodeId, int> vertex_by_section_node;

    for (int code : class_codes) {
        // A_q: children of already-fixed section nodes that carry this class.
        std::vector<NodeId> a_q;
        if (d.vertices.empty()) {
            a_q.push_back(t.root());
        } else {
            for (const auto& vx : d.vertices)
                for (NodeId c : t.children(vx.section))
                    if (topo[c] == code) a_q.push_back(c);
            std::sort(a_q.begin(), a_q.end(), [&](NodeId a, NodeId b) {
                return t.preorder_rank()[a] < t.preorder_rank()[b];
            });
            a_q.erase(std::unique(a_q.begin(), a_q.end()), a_q.end());
        }
        if (a_q.empty()) continue;

        struct Part {
            NodeId rep;
            std::vector<std::pair<NodeId, Cipher>> members;  // (node, cipher rep->node)
        };
        std::vector<Part> parts;
        for (NodeId u : a_q) {
            bool placed = false;
            for (auto& p : parts) {
                auto w = ciphering_witness(t, p.rep, u, label_code, step_limit_per_test);
                if (w) {
                    p.members.emplace_back(u, std::move(*w));
                    placed = true;
                    break;
                }
            }
            if (!placed) parts.push_back(Part{u, {{u, Cipher::identity()}}});
        }

        for (auto& p : parts) {
            int r = static_cast<int>(d.vertices.size());
            d.vertices.push_back(DagRw::Vertex{t.label(p.rep), p.rep});
            vertex_by_section_node[p.rep] = r;
            for (auto& [u, cipher] : p.members) {
                if (vertex_of_node) (*vertex_of_node)[u] = r;
                if (t.is_root(u)) continue;  // the source has no incoming edge
                int from = vertex_by_section_node.at(t.parent(u));
                d.edges.push_back(DagRw::Edge{from, r, std::move(cipher)});
            }
        }
    }
    d.source = 0;
    return d;
}

namespace {

struct RwShape {
    std::vector<std::vector<int>> out;  // vertex -> edge indices, in storage order
    std::vector<int> indeg;
};

RwShape rw_shape(const DagRw& d) {
    const int n = static_cast<int>(d.vertices.size());
    if (n == 0) throw std::invalid_argument("DAG-RW has no vertices");
    RwShape s;
    s.out.resize(n);
    s.indeg.assign(n, 0);
    for (int i = 0; i < static_cast<int>(d.edges.size()); ++i) {
        const auto& e = d.edges[i];
        if (e.from < 0 || e.from >= n || e.to < 0 || e.to >= n)
            throw std::invalid_argument("DAG-RW edge out of range");
        s.out[e.from].push_back(i);
        s.indeg[e.to]++;
    }
    int sources = 0;
    for (int v = 0; v < n; ++v) sources += (s.indeg[v] == 0);
    if (sources != 1 || s.indeg[d.source] != 0)
        throw std::invalid_argument("DAG-RW must have a unique source");
    // every non-source vertex needs an identity in-edge
    std::vector<bool> has_id(n, false);
    has_id[d.source] = true;
    for (const auto& e : d.edges)
        if (e.cipher.is_identity()) has_id[e.to] = true;
    for (int v = 0; v < n; ++v)
        if (!has_id[v])
            throw std::invalid_argument("DAG-RW vertex lacks an identity in-edge");
    // acyclicity + reachability via Kahn
    std::vector<int> indeg = s.indeg;
    std::vector<int> q{d.source};
    int seen = 0;
    while (!q.empty()) {
        int v = q.back();
        q.pop_back();
        ++seen;
        std::unordered_set<int> targets;
        for (int ei : s.out[v]) targets.insert(d.edges[ei].to);
        for (int tov : targets) {
            int k = 0;
            for (int ei : s.out[v]) k += (d.edges[ei].to == tov);
            indeg[tov] -= k;
            if (indeg[tov] == 0) q.push_back(tov);
        }
    }
    if (seen != n) throw std::invalid_argument("DAG-RW contains a cycle or unreachable part");
    return s;
}

/// Accumulated label function along a path; empty = identity passthrough.
struct PathMap {
    bool passthrough = true;
    std::unordered_map<std::string, std::string> map;

    std::string apply(const std::string& x) const {
        if (passthrough) return x;
        auto it = map.find(x);
        if (it == map.end())
            throw std::invalid_argument("cipher composition undefined on label: " + x);
        return it->second;
    }

    PathMap compose_with(const Cipher& edge) const {
        if (edge.is_identity()) return *this;
        PathMap next;
        next.passthrough = false;
        for (const auto& [a, b] : edge.table) next.map.emplace(a, apply(b));
        return next;
    }
};

void check_cipher_bijective(const Cipher& c) {
    if (c.is_identity()) return;
    std::unordered_set<std::string> from, to;
    for (const auto& [a, b] : c.table)
        if (!from.insert(a).second || !to.insert(b).second)
            throw std::invalid_argument("edge cipher is not a bijection");
}

long long rw_expanded_size(const DagRw& d, const RwShape& s) {
    const int n = static_cast<int>(d.vertices.size());
    std::vector<int> indeg(n, 0);
    for (const auto& e : d.edges) indeg[e.to]++;
    std::vector<int> q;
    std::vector<int> order;
    for (int v = 0; v < n; ++v)
        if (indeg[v] == 0) q.push_back(v);
    while (!q.empty()) {
        int v = q.back();
        q.pop_back();
        order.push_back(v);
        for (int ei : s.out[v])
            if (--indeg[d.edges[ei].to] == 0) q.push_back(d.edges[ei].to);
    }
    std::vector<long long> size(n, -1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        long long total = 1;
        for (int ei : s.out[*it]) {
            total += size[d.edges[ei].to];
            if (size[d.edges[ei].to] < 0 || total > kMaxExpandedNodes)
                throw std::invalid_argument("DAG-RW expands beyond supported size");
        }
        size[*it] = total;
    }
    return size[d.source];
}

}  // namespace

LabeledTree decompress_rw(const DagRw& d) {
    RwShape s = rw_shape(d);
    for (const auto& e : d.edges) check_cipher_bijective(e.cipher);
    rw_expanded_size(d, s);
    std::vector<TreeNode> nodes;
    struct Item {
        int vertex;
        NodeId parent;
        PathMap path;
    };
    std::vector<Item> stack{{d.source, kNoNode, PathMap{}}};
    while (!stack.empty()) {
        Item item = std::move(stack.back());
        stack.pop_back();
        NodeId id = static_cast<NodeId>(nodes.size());
        nodes.push_back(TreeNode{item.path.apply(d.vertices[item.vertex].label), item.parent, {}});
        if (item.parent != kNoNode) nodes[item.parent].children.push_back(id);
        const auto& out = s.out[item.vertex];
        for (auto it = out.rbegin(); it != out.rend(); ++it) {
            const auto& e = d.edges[*it];
            stack.push_back(Item{e.to, id, item.path.compose_with(e.cipher)});
        }
    }
    return LabeledTree(std::move(nodes));
}

long long rw_tree_size(const DagRw& d) {
    RwShape s = rw_shape(d);
    return rw_expanded_size(d, s);
}

RwStats rw_stats(const DagRw& d) {
    RwStats st;
    st.vertex_count = static_cast<int>(d.vertices.size());
    st.edge_count = static_cast<long long>(d.edges.size());
    for (const auto& e : d.edges) {
        if (e.cipher.is_identity())
            st.identity_edge_count++;
        else
            st.cipher_payload += static_cast<long long>(e.cipher.table.size());
    }
    return st;
}

std::string dag_rw_to_json(const DagRw& d) {
    nlohmann::json j;
    j["source"] = d.source;
    auto& vs = j["vertices"] = nlohmann::json::array();
    for (int i = 0; i < static_cast<int>(d.vertices.size()); ++i)
        vs.push_back({{"id", i}, {"label", d.vertices[i].label}, {"section", d.vertices[i].section}});
    auto& es = j["edges"] = nlohmann::json::array();
    for (const auto& e : d.edges) {
        nlohmann::json c;
        if (e.cipher.is_identity()) {
            c["kind"] = "identity";
        } else {
            c["kind"] = "table";
            auto& tab = c["table"] = nlohmann::json::array();
            for (const auto& [a, b] : e.cipher.table) tab.push_back({a, b});
        }
        es.push_back({{"from", e.from}, {"to", e.to}, {"cipher", std::move(c)}});
    }
    return j.dump(2);
}

DagRw dag_rw_from_json(std::string_view text) {
    nlohmann::json j = nlohmann::json::parse(text);
    DagRw d;
    d.source = j.at("source").get<int>();
    for (const auto& v : j.at("vertices"))
        d.vertices.push_back(DagRw::Vertex{v.at("label").get<std::string>(),
                                           v.value("section", -1)});
    for (const auto& e : j.at("edges")) {
        DagRw::Edge edge;
        edge.from = e.at("from").get<int>();
        edge.to = e.at("to").get<int>();
        const auto& c = e.at("cipher");
        if (c.at("kind").get<std::string>() == "identity") {
            edge.cipher = Cipher::identity();
        } else {
            std::vector<std::pair<std::string, std::string>> table;
            for (const auto& row : c.at("table"))
                table.emplace_back(row.at(0).get<std::string>(), row.at(1).get<std::string>());
            edge.cipher.kind = Cipher::Kind::Table;
            std::sort(table.begin(), table.end());
            edge.cipher.table = std::move(table);
        }
        d.edges.push_back(std::move(edge));
    }
    return d;
}

std::string dag_rw_to_dot(const DagRw& d) {
    std::string out = "digraph dagrw {\n";
    for (int i = 0; i < static_cast<int>(d.vertices.size()); ++i)
        out += "  n" + std::to_string(i) + " [label=\"" + d.vertices[i].label + "\"];\n";
    for (const auto& e : d.edges) {
        std::string lab = "id";
        if (!e.cipher.is_identity()) {
            lab.clear();
            for (const auto& [a, b] : e.cipher.table) {
                if (!lab.empty()) lab += ";";
                lab += a + "→" + b;
            }
        }
        out += "  n" + std::to_string(e.from) + " -> n" + std::to_string(e.to) + " [label=\"" +
               lab + "\"];\n";
    }
    out += "}\n";
    return out;
}

}  // namespace treecipher
