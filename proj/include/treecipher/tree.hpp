#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace treecipher {

using NodeId = int;
constexpr NodeId kNoNode = -1;

/// Thrown by parse_tree with the byte offset of the offending input position.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string message, std::size_t offset)
        : std::runtime_error(std::move(message)), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

struct TreeNode {
    std::string label;
    NodeId parent = kNoNode;
    std::vector<NodeId> children;  // storage order only, no semantics
};

/// Rooted unordered tree with opaque string labels. Node 0 is the root.
/// Immutable after construction; safe to share across threads.
class LabeledTree {
public:
    LabeledTree() = default;
    explicit LabeledTree(std::vector<TreeNode> nodes);

    int size() const { return static_cast<int>(nodes_.size()); }
    const TreeNode& node(NodeId id) const { return nodes_[id]; }
    const std::string& label(NodeId id) const { return nodes_[id].label; }
    NodeId parent(NodeId id) const { return nodes_[id].parent; }
    const std::vector<NodeId>& children(NodeId id) const { return nodes_[id].children; }
    NodeId root() const { return 0; }
    bool is_root(NodeId id) const { return id == 0; }

    /// Position of each node in a preorder traversal (storage child order).
    const std::vector<int>& preorder_rank() const { return preorder_rank_; }
    /// Node ids listed in preorder.
    const std::vector<NodeId>& preorder() const { return preorder_; }

    int depth(NodeId id) const { return depth_[id]; }
    const std::vector<int>& depths() const { return depth_; }

    std::vector<std::string> alphabet() const;  // distinct labels, sorted

private:
    std::vector<TreeNode> nodes_;
    std::vector<NodeId> preorder_;
    std::vector<int> preorder_rank_;
    std::vector<int> depth_;
};

struct TopoStats {
    int size = 0;
    int height = 0;
    int degree = 0;
    std::vector<int> depth;
};

/// Grammar: tree := label ( "(" tree ("," tree)* ")" )?
/// label is a bare token over [A-Za-z0-9_.+-] or a double-quoted string with
/// backslash escapes. Whitespace outside quotes is ignored.
LabeledTree parse_tree(std::string_view text);

/// Inverse of parse_tree up to whitespace; children in storage order.
std::string serialize_tree(const LabeledTree& t);
std::string quote_label_if_needed(const std::string& label);

TopoStats compute_stats(const LabeledTree& t);

/// Builders used by the generators and tests.
class TreeBuilder {
public:
    NodeId add_root(std::string label);
    NodeId add_child(NodeId parent, std::string label);
    LabeledTree build();

private:
    std::vector<TreeNode> nodes_;
};

/// Copy of the subtree rooted at v, renumbered in preorder.
LabeledTree subtree(const LabeledTree& t, NodeId v);

/// Copy of t with every label replaced through `map` (applied per node).
template <typename F>
LabeledTree relabel(const LabeledTree& t, F&& map) {
    std::vector<TreeNode> nodes;
    nodes.reserve(t.size());
    for (NodeId v = 0; v < t.size(); ++v) {
        TreeNode n = t.node(v);
        n.label = map(n.label);
        nodes.push_back(std::move(n));
    }
    return LabeledTree(std::move(nodes));
}

/// JSON form {"label": str, "children": [...]}.
std::string tree_to_json(const LabeledTree& t);
LabeledTree tree_from_json(std::string_view json_text);

/// One tree per line; '#'-prefixed comment lines and blank lines ignored.
std::vector<LabeledTree> parse_dataset(std::string_view text);

}  // namespace treecipher
