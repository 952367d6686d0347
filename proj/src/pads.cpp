#include "dhtchain/pads.hpp"

#include <algorithm>
#include <deque>
#include <mutex>

#include "dhtchain/errors.hpp"

namespace dhtchain::pads {

void TreeParams::validate() const {
    if (width < 3 || width > 160) throw ConfigError("tree width must be in [3,160]");
    if (digest_bytes < 4 || digest_bytes > kMaxDigestBytes)
        throw ConfigError("digest length must be in [4,32]");
}

static constexpr uint8_t kLeafTag = 0x00;
static constexpr uint8_t kInternalTag = 0x01;

Digest leaf_digest(const StateValue& value, size_t digest_bytes) {
    uint8_t tag = kLeafTag;
    return truncated_sha256({ByteSpan(&tag, 1), ByteSpan(value.payload())}, digest_bytes);
}

Digest internal_digest(const Digest& left, const Digest& right) {
    if (left.size() != right.size()) throw InternalInconsistency("child digest lengths differ");
    uint8_t tag = kInternalTag;
    return truncated_sha256({ByteSpan(&tag, 1), left.bytes(), right.bytes()}, left.size());
}

const Digest& empty_digest(int level, size_t digest_bytes) {
    if (level < 0 || level > 160) throw Error("empty_digest level out of range");
    static std::mutex mu;
    static std::map<size_t, std::deque<Digest>> tables;
    std::lock_guard lock(mu);
    auto& table = tables[digest_bytes];
    if (table.empty()) table.push_back(leaf_digest(StateValue(), digest_bytes));
    while (int(table.size()) <= level)
        table.push_back(internal_digest(table.back(), table.back()));
    return table[size_t(level)];
}

NodeRef Node::leaf(StateValue value, size_t digest_bytes) {
    if (value.is_null()) return empty(0, digest_bytes);
    auto n = std::shared_ptr<Node>(new Node());
    n->kind_ = NodeKind::leaf;
    n->digest_ = leaf_digest(value, digest_bytes);
    n->value_ = std::move(value);
    return n;
}

NodeRef Node::internal(NodeRef left, NodeRef right) {
    if (!left || !right) throw Error("internal node with missing child");
    if (left->kind() == NodeKind::empty && right->kind() == NodeKind::empty)
        return empty(left->level() + 1, left->digest().size());
    auto n = std::shared_ptr<Node>(new Node());
    n->kind_ = NodeKind::internal;
    n->digest_ = internal_digest(left->digest(), right->digest());
    n->left_ = std::move(left);
    n->right_ = std::move(right);
    return n;
}

NodeRef Node::stub(Digest digest, int height, size_t digest_bytes) {
    if (digest.size() != digest_bytes) throw InternalInconsistency("stub digest length");
    if (digest == empty_digest(height, digest_bytes)) return empty(height, digest_bytes);
    auto n = std::shared_ptr<Node>(new Node());
    n->kind_ = NodeKind::stub;
    n->digest_ = std::move(digest);
    n->level_ = height;
    return n;
}

NodeRef Node::empty(int level, size_t digest_bytes) {
    auto n = std::shared_ptr<Node>(new Node());
    n->kind_ = NodeKind::empty;
    n->digest_ = empty_digest(level, digest_bytes);
    n->level_ = level;
    return n;
}

Pads::Pads(NodeRef root, TreeParams params) : root_(std::move(root)), params_(params) {
    params_.validate();
    if (!root_) throw Error("pads with null root");
}

const Digest& root(const Pads& p) {
    return p.root();
}

static void check_key(const Pads& p, const StateKey& key) {
    if (key.width() != p.width()) throw WidthMismatch("key width does not match tree");
}

/* ---- build_full ---- */

using Entry = std::pair<StateKey, StateValue>;

static NodeRef build_range(const std::vector<Entry>& entries, size_t lo, size_t hi, int depth,
                           const TreeParams& params) {
    int height = params.width - depth;
    if (lo == hi) return Node::empty(height, params.digest_bytes);
    if (depth == params.width) {
        if (hi - lo != 1) throw Error("duplicate key in build");
        return Node::leaf(entries[lo].second, params.digest_bytes);
    }
    size_t mid = lo;
    while (mid < hi && !entries[mid].first.bit(depth)) ++mid;
    return Node::internal(build_range(entries, lo, mid, depth + 1, params),
                          build_range(entries, mid, hi, depth + 1, params));
}

Pads build_full(const StateMap& state, TreeParams params) {
    params.validate();
    std::vector<Entry> entries;
    entries.reserve(state.size());
    for (const auto& [k, v] : state) {
        if (k.width() != params.width) throw WidthMismatch("state key width mismatch");
        if (!v.is_null()) entries.emplace_back(k, v);
    }
    return Pads(build_range(entries, 0, entries.size(), 0, params), params);
}

/* ---- prove / verify ---- */

std::pair<StateValue, Proof> prove(const Pads& p, const StateKey& key) {
    check_key(p, key);
    const size_t dlen = p.params().digest_bytes;
    Proof proof{key, {}};
    proof.path.reserve(size_t(p.width()));
    const Node* node = p.root_node().get();
    StateValue value;
    for (int depth = 0; depth < p.width(); ++depth) {
        switch (node->kind()) {
            case NodeKind::internal: {
                bool right = key.bit(depth);
                const Node* next = right ? node->right().get() : node->left().get();
                const Node* sib = right ? node->left().get() : node->right().get();
                proof.path.push_back({right ? Side::right : Side::left, sib->digest()});
                node = next;
                break;
            }
            case NodeKind::empty: {
                int h = node->level();
                for (int j = 0; j < h; ++j) {
                    bool right = key.bit(depth + j);
                    proof.path.push_back(
                        {right ? Side::right : Side::left, empty_digest(h - 1 - j, dlen)});
                }
                std::reverse(proof.path.begin(), proof.path.end());
                return {StateValue(), std::move(proof)};
            }
            case NodeKind::stub:
                throw KeyPruned("key path hits a stub at depth " + std::to_string(depth));
            case NodeKind::leaf:
                throw InternalInconsistency("leaf above full depth");
        }
    }
    switch (node->kind()) {
        case NodeKind::leaf:
            value = node->value();
            break;
        case NodeKind::empty:
            break;
        case NodeKind::stub:
            throw KeyPruned("leaf itself is pruned");
        default:
            throw InternalInconsistency("internal node at full depth");
    }
    std::reverse(proof.path.begin(), proof.path.end());
    return {std::move(value), std::move(proof)};
}

static std::optional<Digest> fold_proof(const StateKey& key, const StateValue& value,
                                        const Proof& proof, size_t digest_bytes) {
    const int w = key.width();
    if (proof.key != key) return std::nullopt;
    if (int(proof.path.size()) != w) return std::nullopt;
    Digest cur = leaf_digest(value, digest_bytes);
    for (int j = 0; j < w; ++j) {
        const ProofEntry& e = proof.path[size_t(j)];
        bool right = key.bit(w - 1 - j);
        if ((e.side == Side::right) != right) return std::nullopt;
        if (e.sibling.size() != digest_bytes) return std::nullopt;
        cur = right ? internal_digest(e.sibling, cur) : internal_digest(cur, e.sibling);
    }
    return cur;
}

bool verify_proof(const Digest& root, const StateKey& key, const StateValue& value,
                  const Proof& proof) {
    if (root.empty()) return false;
    auto folded = fold_proof(key, value, proof, root.size());
    return folded && *folded == root;
}

Digest root_after_update(const Proof& proof, const StateKey& key, const StateValue& value) {
    if (proof.path.empty()) throw Error("empty proof");
    auto folded = fold_proof(key, value, proof, proof.path.front().sibling.size());
    if (!folded) throw Error("proof does not match key");
    return *folded;
}

/* ---- prune ---- */

static bool path_provable(const Node* node, const StateKey& key, int width) {
    for (int depth = 0; depth < width; ++depth) {
        switch (node->kind()) {
            case NodeKind::internal:
                node = key.bit(depth) ? node->right().get() : node->left().get();
                break;
            case NodeKind::empty:
                return true;
            case NodeKind::stub:
                return false;
            case NodeKind::leaf:
                return false;
        }
    }
    return node->kind() != NodeKind::stub;
}

bool is_provable(const Pads& p, const StateKey& key) {
    check_key(p, key);
    return path_provable(p.root_node().get(), key, p.width());
}

using KeyIter = std::vector<StateKey>::const_iterator;

static NodeRef prune_rec(const NodeRef& node, int depth, KeyIter lo, KeyIter hi,
                         const TreeParams& params) {
    int height = params.width - depth;
    if (lo == hi) {
        if (node->kind() == NodeKind::empty || node->kind() == NodeKind::stub) return node;
        return Node::stub(node->digest(), height, params.digest_bytes);
    }
    switch (node->kind()) {
        case NodeKind::empty:
        case NodeKind::leaf:
            return node;
        case NodeKind::stub:
            throw KeyPruned("keep key under a stub");
        case NodeKind::internal: {
            KeyIter mid = lo;
            while (mid != hi && !mid->bit(depth)) ++mid;
            NodeRef l = prune_rec(node->left(), depth + 1, lo, mid, params);
            NodeRef r = prune_rec(node->right(), depth + 1, mid, hi, params);
            if (l == node->left() && r == node->right()) return node;
            return Node::internal(std::move(l), std::move(r));
        }
    }
    throw InternalInconsistency("unreachable");
}

Pads prune(const Pads& p, const std::set<StateKey>& keep) {
    std::vector<StateKey> keys(keep.begin(), keep.end());
    for (const StateKey& k : keys) {
        check_key(p, k);
        if (!is_provable(p, k)) throw KeyPruned("keep key already pruned: " + k.str());
    }
    return Pads(prune_rec(p.root_node(), 0, keys.begin(), keys.end(), p.params()), p.params());
}

/* ---- merge ---- */

static NodeRef merge_rec(const NodeRef& a, const NodeRef& b) {
    if (a == b) return a;
    if (a->digest() != b->digest())
        throw InternalInconsistency("overlapping nodes disagree");
    if (a->kind() == NodeKind::stub) return b;
    if (b->kind() == NodeKind::stub) return a;
    if (a->kind() != b->kind()) throw InternalInconsistency("node kinds disagree");
    switch (a->kind()) {
        case NodeKind::empty:
            return a;
        case NodeKind::leaf:
            if (a->value() != b->value()) throw InternalInconsistency("leaf values disagree");
            return a;
        case NodeKind::internal: {
            NodeRef l = merge_rec(a->left(), b->left());
            NodeRef r = merge_rec(a->right(), b->right());
            if (l == a->left() && r == a->right()) return a;
            if (l == b->left() && r == b->right()) return b;
            return Node::internal(std::move(l), std::move(r));
        }
        default:
            throw InternalInconsistency("unreachable");
    }
}

Pads merge(const Pads& a, const Pads& b) {
    if (!(a.params() == b.params())) throw WidthMismatch("merge parameter mismatch");
    if (a.root() != b.root()) throw RootMismatch("merge of different states");
    return Pads(merge_rec(a.root_node(), b.root_node()), a.params());
}

/* ---- apply_writes ---- */

static NodeRef apply_rec(const NodeRef& node, int depth, KeyIter lo, KeyIter hi,
                         const WriteSet& writes, const TreeParams& params) {
    if (lo == hi) return node;
    int height = params.width - depth;
    switch (node->kind()) {
        case NodeKind::stub:
            throw WriteToPrunedKey("write under a stub: " + lo->str());
        case NodeKind::leaf: {
            if (hi - lo != 1) throw Error("duplicate write key");
            return Node::leaf(writes.at(*lo), params.digest_bytes);
        }
        case NodeKind::empty: {
            if (depth == params.width) return Node::leaf(writes.at(*lo), params.digest_bytes);
            NodeRef child = Node::empty(height - 1, params.digest_bytes);
            KeyIter mid = lo;
            while (mid != hi && !mid->bit(depth)) ++mid;
            return Node::internal(apply_rec(child, depth + 1, lo, mid, writes, params),
                                  apply_rec(child, depth + 1, mid, hi, writes, params));
        }
        case NodeKind::internal: {
            KeyIter mid = lo;
            while (mid != hi && !mid->bit(depth)) ++mid;
            NodeRef l = apply_rec(node->left(), depth + 1, lo, mid, writes, params);
            NodeRef r = apply_rec(node->right(), depth + 1, mid, hi, writes, params);
            if (l == node->left() && r == node->right()) return node;
            return Node::internal(std::move(l), std::move(r));
        }
    }
    throw InternalInconsistency("unreachable");
}

Pads apply_writes(const Pads& p, const WriteSet& writes) {
    std::vector<StateKey> keys;
    keys.reserve(writes.size());
    for (const auto& [k, v] : writes) {
        check_key(p, k);
        keys.push_back(k);
    }
    return Pads(apply_rec(p.root_node(), 0, keys.begin(), keys.end(), writes, p.params()),
                p.params());
}

/* ---- from_proof ---- */

Pads from_proof(const Proof& proof, const StateValue& value, TreeParams params) {
    params.validate();
    if (proof.key.width() != params.width) throw WidthMismatch("proof key width mismatch");
    if (int(proof.path.size()) != params.width) throw Error("proof length mismatch");
    NodeRef cur = Node::leaf(value, params.digest_bytes);
    for (int j = 0; j < params.width; ++j) {
        const ProofEntry& e = proof.path[size_t(j)];
        NodeRef sib = Node::stub(e.sibling, j, params.digest_bytes);
        cur = e.side == Side::right ? Node::internal(std::move(sib), std::move(cur))
                                    : Node::internal(std::move(cur), std::move(sib));
    }
    return Pads(std::move(cur), params);
}

/* ---- misc ---- */

std::optional<StateValue> lookup_value(const Pads& p, const StateKey& key) {
    check_key(p, key);
    const Node* node = p.root_node().get();
    for (int depth = 0; depth < p.width(); ++depth) {
        switch (node->kind()) {
            case NodeKind::internal:
                node = key.bit(depth) ? node->right().get() : node->left().get();
                break;
            case NodeKind::empty:
                return StateValue();
            default:
                return std::nullopt;
        }
    }
    if (node->kind() == NodeKind::leaf) return node->value();
    if (node->kind() == NodeKind::empty) return StateValue();
    return std::nullopt;
}

static bool equal_rec(const Node* a, const Node* b) {
    if (a == b) return true;
    if (a->kind() != b->kind()) return false;
    switch (a->kind()) {
        case NodeKind::leaf:
            return a->value() == b->value();
        case NodeKind::stub:
            return a->digest() == b->digest();
        case NodeKind::empty:
            return a->level() == b->level();
        case NodeKind::internal:
            return equal_rec(a->left().get(), b->left().get()) &&
                   equal_rec(a->right().get(), b->right().get());
    }
    return false;
}

bool structurally_equal(const Pads& a, const Pads& b) {
    return a.params() == b.params() && equal_rec(a.root_node().get(), b.root_node().get());
}

static void collect_leaves(const Node* node, BitKey prefix, int depth, int width,
                           std::vector<StateKey>& out) {
    if (node->kind() == NodeKind::leaf) {
        out.push_back(prefix);
        return;
    }
    if (node->kind() != NodeKind::internal) return;
    collect_leaves(node->left().get(), prefix.with_bit(depth, false), depth + 1, width, out);
    collect_leaves(node->right().get(), prefix.with_bit(depth, true), depth + 1, width, out);
}

std::vector<StateKey> explicit_leaves(const Pads& p) {
    std::vector<StateKey> out;
    Bytes zero((size_t(p.width()) + 7) / 8, 0);
    collect_leaves(p.root_node().get(), BitKey(zero, p.width()), 0, p.width(), out);
    return out;
}

static size_t count_rec(const Node* n) {
    if (n->kind() == NodeKind::internal)
        return 1 + count_rec(n->left().get()) + count_rec(n->right().get());
    return 1;
}

size_t node_count(const Pads& p) {
    return count_rec(p.root_node().get());
}

static void render_rec(const Node* n, int depth, std::string& out) {
    out.append(size_t(depth) * 2, ' ');
    switch (n->kind()) {
        case NodeKind::leaf:
            out += "leaf " + to_hex(n->value().payload()) + "\n";
            break;
        case NodeKind::stub:
            out += "stub " + n->digest().hex() + "\n";
            break;
        case NodeKind::empty:
            out += "empty h=" + std::to_string(n->level()) + "\n";
            break;
        case NodeKind::internal:
            out += "internal\n";
            render_rec(n->left().get(), depth + 1, out);
            render_rec(n->right().get(), depth + 1, out);
            break;
    }
}

std::string render(const Pads& p) {
    std::string out;
    render_rec(p.root_node().get(), 0, out);
    return out;
}

}  // namespace dhtchain::pads
