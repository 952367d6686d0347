#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dhtchain/bits.hpp"
#include "dhtchain/bytes.hpp"
#include "dhtchain/hash.hpp"

namespace dhtchain::pads {

using StateKey = BitKey;

/* A state element's payload. The empty byte string is the null value: it
   marks an unassigned element and hashes like one, so "absent" and "present
   with null" are indistinguishable at the tree layer. */
class StateValue {
public:
    StateValue() = default;
    explicit StateValue(Bytes payload) : payload_(std::move(payload)) {}

    static StateValue of(const std::string& s) { return StateValue(to_bytes(s)); }

    bool is_null() const { return payload_.empty(); }
    const Bytes& payload() const { return payload_; }

    friend auto operator<=>(const StateValue&, const StateValue&) = default;

private:
    Bytes payload_;
};

enum class NodeKind : uint8_t { leaf = 0, internal = 1, stub = 2, empty = 3 };

struct TreeParams {
    int width = 160;
    size_t digest_bytes = kDefaultDigestBytes;

    void validate() const;
    friend bool operator==(const TreeParams&, const TreeParams&) = default;
};

/* Domain-separated node digests. A leaf digest covers the value only; the
   key is fixed by the leaf's position. */
Digest leaf_digest(const StateValue& value, size_t digest_bytes);
Digest internal_digest(const Digest& left, const Digest& right);

/* Digest of an all-null subtree of the given height, memoized per level. */
const Digest& empty_digest(int level, size_t digest_bytes = kDefaultDigestBytes);

class Node;
using NodeRef = std::shared_ptr<const Node>;

/* Immutable tree node. Every node carries its digest, computed once at
   construction. The factories canonicalize: a null leaf becomes empty(0),
   two empty siblings collapse into a taller empty node, and a stub whose
   digest equals the all-null digest becomes empty. */
class Node {
public:
    NodeKind kind() const { return kind_; }
    const Digest& digest() const { return digest_; }
    const StateValue& value() const { return value_; }
    const NodeRef& left() const { return left_; }
    const NodeRef& right() const { return right_; }
    int level() const { return level_; }

    static NodeRef leaf(StateValue value, size_t digest_bytes);
    static NodeRef internal(NodeRef left, NodeRef right);
    static NodeRef stub(Digest digest, int height, size_t digest_bytes);
    static NodeRef empty(int level, size_t digest_bytes);

private:
    Node() = default;

    NodeKind kind_ = NodeKind::empty;
    int level_ = 0;
    Digest digest_;
    StateValue value_;
    NodeRef left_, right_;
};

/* Pruned authenticated search tree over fixed-width keys. Values are
   immutable; every operation returns a new tree sharing untouched nodes. */
class Pads {
public:
    Pads(NodeRef root, TreeParams params);

    const Digest& root() const { return root_->digest(); }
    const NodeRef& root_node() const { return root_; }
    const TreeParams& params() const { return params_; }
    int width() const { return params_.width; }

private:
    NodeRef root_;
    TreeParams params_;
};

enum class Side : uint8_t { left = 0, right = 1 };

/* Inclusion proof, ordered leaf to root. Each entry records which side the
   proven path entered the parent from and the digest of the other child. */
struct ProofEntry {
    Side side;
    Digest sibling;
};

struct Proof {
    StateKey key;
    std::vector<ProofEntry> path;
};

using StateMap = std::map<StateKey, StateValue>;
using WriteSet = std::map<StateKey, StateValue>;

/* Fully materialized tree for a key-value map; absent keys are null. */
Pads build_full(const StateMap& state, TreeParams params);

const Digest& root(const Pads& p);

std::pair<StateValue, Proof> prove(const Pads& p, const StateKey& key);

bool verify_proof(const Digest& root, const StateKey& key, const StateValue& value,
                  const Proof& proof);

/* Root the tree would have after updating key to value, computed from the
   proof alone. */
Digest root_after_update(const Proof& proof, const StateKey& key, const StateValue& value);

/* Minimal tree keeping exactly the given keys provable. */
Pads prune(const Pads& p, const std::set<StateKey>& keep);

/* Union of two prunings of the same state. Roots must match; overlapping
   materialized nodes that disagree signal a forged input. */
Pads merge(const Pads& a, const Pads& b);

Pads apply_writes(const Pads& p, const WriteSet& writes);

/* Rebuild the tree a proof was cut from: the proven path materialized,
   every sibling a stub. */
Pads from_proof(const Proof& proof, const StateValue& value, TreeParams params);

/* Canonical preorder encoding. Stub digests are serialized, internal
   digests never are; decode recomputes them. */
Bytes encode(const Pads& p);
Pads decode(ByteSpan data, TreeParams params);

std::string render(const Pads& p);

bool structurally_equal(const Pads& a, const Pads& b);

bool is_provable(const Pads& p, const StateKey& key);

/* Leaf value if the key is provable, nullopt if it sits under a stub. */
std::optional<StateValue> lookup_value(const Pads& p, const StateKey& key);

/* Keys of all materialized leaves (explicitly stored values). */
std::vector<StateKey> explicit_leaves(const Pads& p);

size_t node_count(const Pads& p);

}  // namespace dhtchain::pads
