#include "agps/dsl/tree.hpp"

#include <cctype>

namespace agps::dsl {

TreePtr make_leaf(UnaryOp u, std::string operant) {
    auto n = std::make_shared<TreeNode>();
    n->kind = TreeNode::Kind::Leaf;
    n->unary = u;
    n->operant = std::move(operant);
    return n;
}

TreePtr make_mid(int level, UnaryOp u, GroupingOp g, TreePtr single_child) {
    auto n = std::make_shared<TreeNode>();
    n->kind = TreeNode::Kind::Mid;
    n->level = level;
    n->unary = u;
    n->grouping = g;
    n->is_pair = false;
    n->left = std::move(single_child);
    return n;
}

TreePtr make_mid(int level, UnaryOp u, GroupingOp g, BinaryOp b, TreePtr left, TreePtr right) {
    auto n = std::make_shared<TreeNode>();
    n->kind = TreeNode::Kind::Mid;
    n->level = level;
    n->unary = u;
    n->grouping = g;
    n->is_pair = true;
    n->binary = b;
    n->left = std::move(left);
    n->right = std::move(right);
    return n;
}

bool tree_equal(const TreePtr& a, const TreePtr& b) {
    if (!a || !b) return !a && !b;
    if (a->kind != b->kind || a->unary != b->unary) return false;
    if (a->kind == TreeNode::Kind::Leaf) return a->operant == b->operant;
    if (a->level != b->level || a->grouping != b->grouping || a->is_pair != b->is_pair)
        return false;
    if (a->is_pair && a->binary != b->binary) return false;
    if (!tree_equal(a->left, b->left)) return false;
    return a->is_pair ? tree_equal(a->right, b->right) : true;
}

namespace {

bool is_mid(const TreePtr& n) { return n && n->kind == TreeNode::Kind::Mid; }

void validate_node(const TreePtr& n, int expected_level, bool is_root) {
    if (!n) throw ParseError(0, "non-null node");
    if (n->kind == TreeNode::Kind::Leaf) {
        if (n->operant.empty()) throw ParseError(0, "leaf with an operant name");
        return;
    }
    if (is_root && n->level != 3) throw ParseError(0, "root cell at level 3");
    if (n->level != expected_level)
        throw ParseError(0, "cell at level " + std::to_string(expected_level));
    if (n->level < 2) throw ParseError(0, "mid cells no deeper than level 2");
    auto check_child = [&](const TreePtr& c) {
        if (is_mid(c)) {
            if (n->level == 2) throw ParseError(0, "leaf children under a level-2 cell");
            validate_node(c, 2, false);
        } else {
            validate_node(c, 0, false);
        }
    };
    if (n->is_pair) {
        if (is_mid(n->left) && is_mid(n->right))
            throw ParseError(0, "at least one leaf child in every pair");
        check_child(n->left);
        check_child(n->right);
    } else {
        check_child(n->left);
    }
}

}  // namespace

void validate_structure(const TreePtr& tree) {
    if (!tree || tree->kind != TreeNode::Kind::Mid)
        throw ParseError(0, "a mid cell at the root");
    validate_node(tree, 3, true);
}

namespace {

bool is_perfect_square_dim(int d, int* side) {
    for (int s = 2; s * s <= d; ++s) {
        if (s * s == d) {
            *side = s;
            return true;
        }
    }
    return false;
}

FeatureShape unary_shape(UnaryOp u, FeatureShape in, const std::string& path) {
    switch (u) {
        case UnaryOp::Identity:
        case UnaryOp::Square:
        case UnaryOp::Double:
        case UnaryOp::Negative:
        case UnaryOp::Centralize:
        case UnaryOp::Inverse: return in;
        case UnaryOp::Orthogonalize: {
            int side = 0;
            if (in.dim < 4 || !is_perfect_square_dim(in.dim, &side))
                throw ShapeError(path, "orth needs a perfect-square dim >= 4, got " +
                                           std::to_string(in.dim));
            return in;
        }
    }
    throw ShapeError(path, "unreachable unary");
}

FeatureShape infer_node(const TreePtr& n, const std::map<std::string, int>& dims, int k_rows,
                        const std::string& path) {
    if (n->kind == TreeNode::Kind::Leaf) {
        auto it = dims.find(n->operant);
        if (it == dims.end()) throw ShapeError(path, "unknown operant " + n->operant);
        FeatureShape s{FeatureShape::Level::SetLevel, k_rows, it->second};
        return unary_shape(n->unary, s, path);
    }

    FeatureShape in;
    if (!n->is_pair) {
        in = infer_node(n->left, dims, k_rows, path + ".child");
    } else {
        FeatureShape l = infer_node(n->left, dims, k_rows, path + ".left");
        FeatureShape r = infer_node(n->right, dims, k_rows, path + ".right");
        // A grouped operand broadcasts across the set-level rows.
        int rows = std::max(l.rows, r.rows);
        auto lvl = (l.level == FeatureShape::Level::SetLevel ||
                    r.level == FeatureShape::Level::SetLevel)
                       ? FeatureShape::Level::SetLevel
                       : FeatureShape::Level::Grouped;
        switch (n->binary) {
            case BinaryOp::Add:
            case BinaryOp::Minus:
            case BinaryOp::Multiply:
                if (l.dim != r.dim)
                    throw ShapeError(path, "elementwise binary on dims " + std::to_string(l.dim) +
                                               " vs " + std::to_string(r.dim));
                in = {lvl, rows, l.dim};
                break;
            case BinaryOp::CrossProduct:
                if (l.dim != 3 || r.dim != 3)
                    throw ShapeError(path, "cross needs dim 3 on both sides");
                in = {lvl, rows, 3};
                break;
            case BinaryOp::CartesianProduct: in = {lvl, rows, l.dim * r.dim}; break;
            case BinaryOp::MatVecProduct:
                if (l.dim != r.dim * r.dim)
                    throw ShapeError(path, "matvec needs left dim = right dim squared, got " +
                                               std::to_string(l.dim) + " vs " +
                                               std::to_string(r.dim));
                in = {lvl, rows, r.dim};
                break;
        }
    }

    if (n->grouping == GroupingOp::Svd && in.rows < in.dim)
        throw ShapeError(path, "svd grouping needs at least dim rows, got " +
                                   std::to_string(in.rows) + " rows for dim " +
                                   std::to_string(in.dim));
    FeatureShape grouped{FeatureShape::Level::Grouped, 1, in.dim};
    return unary_shape(n->unary, grouped, path);
}

}  // namespace

FeatureShape infer_shape(const TreePtr& tree, const std::map<std::string, int>& operant_dims,
                         int k_rows) {
    validate_structure(tree);
    return infer_node(tree, operant_dims, k_rows, "root");
}

// ---- text form ----

namespace {

void print_node(const TreePtr& n, std::string& out) {
    out += name_of(n->unary);
    out += '(';
    if (n->kind == TreeNode::Kind::Leaf) {
        out += n->operant;
    } else {
        out += name_of(n->grouping);
        out += '(';
        if (n->is_pair) {
            out += name_of(n->binary);
            out += '(';
            print_node(n->left, out);
            out += ',';
            print_node(n->right, out);
            out += ')';
        } else {
            print_node(n->left, out);
        }
        out += ')';
    }
    out += ')';
}

struct Parser {
    const std::string& text;
    std::size_t pos = 0;

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }

    [[noreturn]] void fail(std::size_t at, const std::string& expected) {
        throw ParseError(at, expected);
    }

    void expect(char c) {
        skip_ws();
        if (pos >= text.size() || text[pos] != c) fail(pos, std::string("'") + c + "'");
        ++pos;
    }

    bool peek(char c) {
        skip_ws();
        return pos < text.size() && text[pos] == c;
    }

    std::string ident() {
        skip_ws();
        std::size_t start = pos;
        while (pos < text.size() &&
               (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
            ++pos;
        if (pos == start) fail(start, "identifier");
        return text.substr(start, pos - start);
    }

    // cell := midcell | leaf, both starting UNARY "(".
    TreePtr parse_cell(int level_budget) {
        skip_ws();
        std::size_t at = pos;
        std::string uname = ident();
        auto u = unary_from(uname);
        if (!u) fail(at, "unary operator");
        expect('(');
        skip_ws();
        std::size_t inner_at = pos;
        std::size_t save = pos;
        std::string inner = ident();
        if (grouping_from(inner) && peek('(')) {
            if (level_budget < 2) fail(inner_at, "a leaf cell (tree height limit)");
            GroupingOp g = *grouping_from(inner);
            expect('(');
            TreePtr node = parse_conn(*u, g, level_budget);
            expect(')');
            expect(')');
            return node;
        }
        pos = save;
        std::string operant = ident();
        expect(')');
        return make_leaf(*u, operant);
    }

    TreePtr parse_conn(UnaryOp u, GroupingOp g, int level_budget) {
        skip_ws();
        std::size_t at = pos;
        std::size_t save = pos;
        std::string head = ident();
        auto b = binary_from(head);
        if (b && peek('(')) {
            expect('(');
            TreePtr left = parse_cell(level_budget - 1);
            expect(',');
            TreePtr right = parse_cell(level_budget - 1);
            expect(')');
            if (is_mid(left) && is_mid(right)) fail(at, "at least one leaf operand in the pair");
            return make_mid(level_budget, u, g, *b, std::move(left), std::move(right));
        }
        pos = save;
        TreePtr child = parse_cell(level_budget - 1);
        return make_mid(level_budget, u, g, std::move(child));
    }
};

}  // namespace

std::string print_tree(const TreePtr& tree) {
    validate_structure(tree);
    std::string out;
    print_node(tree, out);
    return out;
}

TreePtr parse_tree(const std::string& text) {
    Parser p{text};
    p.skip_ws();
    std::size_t at = p.pos;
    TreePtr root = p.parse_cell(3);
    p.skip_ws();
    if (p.pos != text.size()) p.fail(p.pos, "end of input");
    if (root->kind != TreeNode::Kind::Mid) p.fail(at, "a grouping cell at the root");
    validate_structure(root);
    return root;
}

}  // namespace agps::dsl
