#include "treecipher/tree.hpp"

#include <algorithm>
#include <set>

#include "json.hpp"

namespace treecipher {

namespace {

bool is_bare_char(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
           c == '_' || c == '.' || c == '+' || c == '-';
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

}  // namespace

LabeledTree::LabeledTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
    const int n = static_cast<int>(nodes_.size());
    if (n == 0) throw std::invalid_argument("tree must have at least one node");
    if (nodes_[0].parent != kNoNode) throw std::invalid_argument("node 0 must be the root");
    depth_.assign(n, 0);
    preorder_.reserve(n);
    preorder_rank_.assign(n, -1);
    // Iterative preorder; doubles as the connectivity/acyclicity check.
    std::vector<NodeId> stack{0};
    while (!stack.empty()) {
        NodeId v = stack.back();
        stack.pop_back();
        if (v < 0 || v >= n) throw std::invalid_argument("child id out of range");
        if (preorder_rank_[v] != -1) throw std::invalid_argument("node visited twice; not a tree");
        preorder_rank_[v] = static_cast<int>(preorder_.size());
        preorder_.push_back(v);
        const auto& ch = nodes_[v].children;
        for (auto it = ch.rbegin(); it != ch.rend(); ++it) {
            if (*it < 0 || *it >= n || nodes_[*it].parent != v)
                throw std::invalid_argument("parent/children links inconsistent");
            depth_[*it] = depth_[v] + 1;
            stack.push_back(*it);
        }
    }
    if (static_cast<int>(preorder_.size()) != n)
        throw std::invalid_argument("graph is not connected");
}

std::vector<std::string> LabeledTree::alphabet() const {
    std::set<std::string> s;
    for (const auto& n : nodes_) s.insert(n.label);
    return {s.begin(), s.end()};
}

NodeId TreeBuilder::add_root(std::string label) {
    if (!nodes_.empty()) throw std::logic_error("root already added");
    nodes_.push_back(TreeNode{std::move(label), kNoNode, {}});
    return 0;
}

NodeId TreeBuilder::add_child(NodeId parent, std::string label) {
    NodeId id = static_cast<NodeId>(nodes_.size());
    nodes_.push_back(TreeNode{std::move(label), parent, {}});
    nodes_[parent].children.push_back(id);
    return id;
}

LabeledTree TreeBuilder::build() { return LabeledTree(std::move(nodes_)); }

namespace {

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    LabeledTree parse() {
        skip_ws();
        if (at_end()) throw ParseError("empty input", pos_);
        parse_node(kNoNode);
        skip_ws();
        if (!at_end()) throw ParseError("trailing input after tree", pos_);
        return LabeledTree(std::move(nodes_));
    }

private:
    void parse_node(NodeId parent) {
        std::string label = parse_label();
        NodeId id = static_cast<NodeId>(nodes_.size());
        nodes_.push_back(TreeNode{std::move(label), parent, {}});
        if (parent != kNoNode) nodes_[parent].children.push_back(id);
        skip_ws();
        if (!at_end() && text_[pos_] == '(') {
            ++pos_;
            while (true) {
                skip_ws();
                parse_node(id);
                skip_ws();
                if (at_end()) throw ParseError("unbalanced parentheses", pos_);
                char c = text_[pos_];
                if (c == ',') {
                    ++pos_;
                    continue;
                }
                if (c == ')') {
                    ++pos_;
                    return;
                }
                throw ParseError("expected ',' or ')'", pos_);
            }
        }
    }

    std::string parse_label() {
        skip_ws();
        if (at_end()) throw ParseError("expected label", pos_);
        if (text_[pos_] == '"') return parse_quoted();
        std::size_t start = pos_;
        while (!at_end() && is_bare_char(text_[pos_])) ++pos_;
        if (pos_ == start) throw ParseError("expected label", pos_);
        return std::string(text_.substr(start, pos_ - start));
    }

    std::string parse_quoted() {
        ++pos_;  // opening quote
        std::string out;
        while (true) {
            if (at_end()) throw ParseError("unterminated quoted label", pos_);
            char c = text_[pos_++];
            if (c == '"') return out;
            if (c == '\\') {
                if (at_end()) throw ParseError("dangling escape", pos_);
                out.push_back(text_[pos_++]);
            } else {
                out.push_back(c);
            }
        }
    }

    void skip_ws() {
        while (!at_end() && is_space(text_[pos_])) ++pos_;
    }
    bool at_end() const { return pos_ >= text_.size(); }

    std::string_view text_;
    std::size_t pos_ = 0;
    std::vector<TreeNode> nodes_;
};

}  // namespace

LabeledTree parse_tree(std::string_view text) { return Parser(text).parse(); }

std::string quote_label_if_needed(const std::string& label) {
    bool bare = !label.empty();
    for (char c : label)
        if (!is_bare_char(c)) bare = false;
    if (bare) return label;
    std::string out = "\"";
    for (char c : label) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

namespace {

void serialize_rec(const LabeledTree& t, NodeId v, std::string& out) {
    out += quote_label_if_needed(t.label(v));
    const auto& ch = t.children(v);
    if (ch.empty()) return;
    out.push_back('(');
    for (std::size_t i = 0; i < ch.size(); ++i) {
        if (i) out.push_back(',');
        serialize_rec(t, ch[i], out);
    }
    out.push_back(')');
}

}  // namespace

std::string serialize_tree(const LabeledTree& t) {
    std::string out;
    serialize_rec(t, t.root(), out);
    return out;
}

TopoStats compute_stats(const LabeledTree& t) {
    TopoStats s;
    s.size = t.size();
    s.depth = t.depths();
    for (NodeId v = 0; v < t.size(); ++v) {
        s.height = std::max(s.height, t.depth(v));
        s.degree = std::max(s.degree, static_cast<int>(t.children(v).size()));
    }
    return s;
}

LabeledTree subtree(const LabeledTree& t, NodeId v) {
    std::vector<TreeNode> nodes;
    std::vector<std::pair<NodeId, NodeId>> stack{{v, kNoNode}};  // (orig, new parent)
    while (!stack.empty()) {
        auto [orig, parent] = stack.back();
        stack.pop_back();
        NodeId id = static_cast<NodeId>(nodes.size());
        nodes.push_back(TreeNode{t.label(orig), parent, {}});
        if (parent != kNoNode) nodes[parent].children.push_back(id);
        const auto& ch = t.children(orig);
        for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.emplace_back(*it, id);
    }
    return LabeledTree(std::move(nodes));
}

namespace {

nlohmann::json node_to_json(const LabeledTree& t, NodeId v) {
    nlohmann::json j;
    j["label"] = t.label(v);
    auto& ch = j["children"] = nlohmann::json::array();
    for (NodeId c : t.children(v)) ch.push_back(node_to_json(t, c));
    return j;
}

void node_from_json(const nlohmann::json& j, NodeId parent, std::vector<TreeNode>& nodes) {
    if (!j.is_object() || !j.contains("label"))
        throw std::invalid_argument("tree JSON node must be an object with a label");
    NodeId id = static_cast<NodeId>(nodes.size());
    nodes.push_back(TreeNode{j.at("label").get<std::string>(), parent, {}});
    if (parent != kNoNode) nodes[parent].children.push_back(id);
    if (j.contains("children"))
        for (const auto& c : j.at("children")) node_from_json(c, id, nodes);
}

}  // namespace

std::string tree_to_json(const LabeledTree& t) { return node_to_json(t, t.root()).dump(); }

LabeledTree tree_from_json(std::string_view json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    std::vector<TreeNode> nodes;
    node_from_json(j, kNoNode, nodes);
    return LabeledTree(std::move(nodes));
}

std::vector<LabeledTree> parse_dataset(std::string_view text) {
    std::vector<LabeledTree> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        std::size_t b = 0, e = line.size();
        while (b < e && is_space(line[b])) ++b;
        while (e > b && is_space(line[e - 1])) --e;
        line = line.substr(b, e - b);
        if (!line.empty() && line[0] != '#') out.push_back(parse_tree(line));
        if (eol == std::string_view::npos) break;
        pos = eol + 1;
    }
    return out;
}

}  // namespace treecipher
