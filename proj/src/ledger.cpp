#include "dhtchain/ledger.hpp"

#include <algorithm>
#include <set>

#include "dhtchain/errors.hpp"

namespace dhtchain::ledger {

void ChainParams::validate() const {
    tree.validate();
    if (d < 2) throw ConfigError("d must be at least 2");
    if (f < 1) throw ConfigError("f must be at least 1");
    if (block_time <= 0) throw ConfigError("block time must be positive");
}

std::vector<StateKey> Transaction::involved() const {
    std::set<StateKey> keys;
    if (kind == TxKind::transfer) {
        keys.insert(from);
        keys.insert(to);
    } else {
        keys.insert(reads.begin(), reads.end());
        keys.insert(writes.begin(), writes.end());
    }
    return {keys.begin(), keys.end()};
}

static constexpr uint8_t kTxIdTag = 0x10;
static constexpr uint8_t kHeaderTag = 0x11;
static constexpr uint8_t kTxListTag = 0x12;
static constexpr uint8_t kGenericUpdateTag = 0x20;
static constexpr uint8_t kSignatureTag = 0x5f;

Digest tx_id(const Transaction& tx, size_t digest_bytes) {
    uint8_t tag = kTxIdTag;
    Bytes body = tx_body(tx);
    return truncated_sha256({ByteSpan(&tag, 1), ByteSpan(body)}, digest_bytes);
}

Bytes KeyedHashScheme::sign(ByteSpan body, const StateKey& owner) const {
    uint8_t tag = kSignatureTag;
    Digest d = truncated_sha256({ByteSpan(&tag, 1), ByteSpan(owner.packed()), body},
                                digest_bytes_);
    return Bytes(d.bytes().begin(), d.bytes().end());
}

bool KeyedHashScheme::verify(ByteSpan body, const StateKey& owner, ByteSpan sig) const {
    Bytes expect = sign(body, owner);
    return sig.size() == expect.size() && std::equal(sig.begin(), sig.end(), expect.begin());
}

void sign_transaction(Transaction& tx, const SignatureScheme& scheme) {
    if (tx.kind == TxKind::transfer)
        tx.signature = scheme.sign(ByteSpan(tx_body(tx)), tx.from);
    else
        tx.signature.clear();
}

std::optional<uint64_t> decode_balance(const StateValue& v) {
    if (v.is_null()) return 0;
    if (v.payload().size() != 8) return std::nullopt;
    uint64_t out = 0;
    for (uint8_t b : v.payload()) out = (out << 8) | b;
    return out;
}

StateValue encode_balance(uint64_t amount) {
    Bytes b(8);
    for (int i = 7; i >= 0; --i) {
        b[size_t(i)] = uint8_t(amount);
        amount >>= 8;
    }
    return StateValue(std::move(b));
}

std::optional<WriteSet> execute_transaction(const Transaction& tx,
                                            const std::map<StateKey, StateValue>& values,
                                            const SignatureScheme& scheme,
                                            size_t digest_bytes) {
    for (const StateKey& k : tx.involved())
        if (!values.count(k)) throw Error("execute_transaction missing value for " + k.str());

    if (tx.kind == TxKind::transfer) {
        if (!scheme.verify(ByteSpan(tx_body(tx)), tx.from, ByteSpan(tx.signature)))
            return std::nullopt;
        auto bal_from = decode_balance(values.at(tx.from));
        auto bal_to = decode_balance(values.at(tx.to));
        if (!bal_from || !bal_to) return std::nullopt;
        if (*bal_from < tx.amount) return std::nullopt;
        WriteSet ws;
        if (tx.from == tx.to) {
            ws[tx.from] = encode_balance(*bal_from);
        } else {
            if (*bal_to + tx.amount < *bal_to) return std::nullopt;  // overflow
            ws[tx.from] = encode_balance(*bal_from - tx.amount);
            ws[tx.to] = encode_balance(*bal_to + tx.amount);
        }
        return ws;
    }

    WriteSet ws;
    uint8_t tag = kGenericUpdateTag;
    Bytes salt(8);
    uint64_t s = tx.salt;
    for (int i = 7; i >= 0; --i) {
        salt[size_t(i)] = uint8_t(s);
        s >>= 8;
    }
    for (const StateKey& k : tx.writes) {
        const StateValue& old = values.at(k);
        Digest d = truncated_sha256(
            {ByteSpan(&tag, 1), ByteSpan(k.packed()), ByteSpan(old.payload()), ByteSpan(salt)},
            digest_bytes);
        ws[k] = StateValue(Bytes(d.bytes().begin(), d.bytes().end()));
    }
    return ws;
}

Digest block_header_digest(uint64_t index, const Digest& parent,
                           const std::vector<Transaction>& txs, const Pads& tau) {
    size_t dlen = tau.params().digest_bytes;
    ByteWriter ids;
    ids.u8(kTxListTag);
    for (const Transaction& tx : txs) ids.raw(tx_id(tx, dlen).bytes());
    Bytes txs_digest = sha256({ByteSpan(ids.bytes())});

    ByteWriter w;
    w.u8(kHeaderTag);
    w.be64(index);
    w.raw(parent.bytes());
    w.raw(ByteSpan(txs_digest));
    w.raw(tau.root().bytes());
    return truncated_sha256({ByteSpan(w.bytes())}, dlen);
}

Block::Block(uint64_t index_, Digest parent_, std::vector<Transaction> txs_, Pads tau_)
    : index(index_), parent(std::move(parent_)), txs(std::move(txs_)), tau(std::move(tau_)) {
    header = block_header_digest(index, parent, txs, tau);
}

const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::ok: return "ok";
        case Verdict::bad_chain: return "bad_chain";
        case Verdict::bad_tau_root: return "bad_tau_root";
        case Verdict::bad_tau_shape: return "bad_tau_shape";
        case Verdict::bad_tx_execution: return "bad_tx_execution";
    }
    return "?";
}

/* ---- truncated chain ---- */

TruncatedChain TruncatedChain::genesis(const ChainParams& params, const StateMap& allocation) {
    params.validate();
    TruncatedChain chain;
    chain.params_ = params;
    Pads tau0 = pads::build_full(allocation, params.tree);
    chain.blocks_.emplace_back(0, Digest::zero(params.tree.digest_bytes),
                               std::vector<Transaction>{}, tau0);
    chain.pis_.push_back(std::move(tau0));
    chain.head_ = 0;
    return chain;
}

/* The oldest block actually retained. Usually head - (d+f) + 1, but a chain
   rebuilt from a peer's window can hold fewer blocks than the full span. */
uint64_t TruncatedChain::window_start() const {
    return blocks_.empty() ? 0 : blocks_.front().index;
}

uint64_t TruncatedChain::pivot_index() const {
    return head_ >= uint64_t(params_.f) ? head_ - uint64_t(params_.f) : 0;
}

bool TruncatedChain::in_window(uint64_t index) const {
    return index >= window_start() && index <= head_;
}

const Block& TruncatedChain::block_at(uint64_t index) const {
    if (!in_window(index)) throw Error("block index outside window");
    return blocks_[size_t(index - blocks_.front().index)];
}

const Pads& TruncatedChain::tau_at(uint64_t index) const {
    return block_at(index).tau;
}

const Pads& TruncatedChain::pi_at(uint64_t index) const {
    if (!in_window(index)) throw Error("pi index outside window");
    return pis_[size_t(index - blocks_.front().index)];
}

WitnessStatus TruncatedChain::verify_witness(const ElementWitness& w) const {
    if (w.pivot_index > head_) return WitnessStatus::invalid;
    if (w.pivot_index < window_start()) return WitnessStatus::stale;
    const Pads& tau = tau_at(w.pivot_index);
    return pads::verify_proof(tau.root(), w.key, w.value, w.proof) ? WitnessStatus::valid
                                                                   : WitnessStatus::invalid;
}

/* ---- backward fill ---- */

namespace {

struct Skel {
    enum class K { internal, stub_slot, leaf_slot } kind = K::internal;
    std::unique_ptr<Skel> left, right;
    std::optional<Digest> digest;      // stub_slot
    std::optional<StateValue> value;   // leaf_slot
};

struct Fill {
    const pads::TreeParams* tree;
    size_t unset = 0;

    void insert_path(Skel& root, const StateKey& key) {
        Skel* cur = &root;
        for (int depth = 0; depth < key.width(); ++depth) {
            auto& child = key.bit(depth) ? cur->right : cur->left;
            if (!child) {
                child = std::make_unique<Skel>();
                child->kind = depth + 1 == key.width() ? Skel::K::leaf_slot : Skel::K::internal;
            } else if (child->kind != Skel::K::internal && depth + 1 < key.width()) {
                child->kind = Skel::K::internal;
                child->digest.reset();
            }
            cur = child.get();
        }
    }

    /* Missing children of path nodes become stub slots. */
    void close(Skel& node) {
        if (node.kind != Skel::K::internal) {
            ++unset;
            return;
        }
        for (auto* child : {&node.left, &node.right}) {
            if (!*child) {
                *child = std::make_unique<Skel>();
                (*child)->kind = Skel::K::stub_slot;
            }
        }
        close(*node.left);
        close(*node.right);
    }

    void set_digest(Skel& s, const Digest& d) {
        if (!s.digest) {
            s.digest = d;
            --unset;
        }
    }

    void set_value(Skel& s, const StateValue& v) {
        if (!s.value) {
            s.value = v;
            --unset;
        }
    }

    void fill_from_pads(Skel& s, const pads::Node* n, int depth) {
        if (unset == 0) return;
        switch (s.kind) {
            case Skel::K::stub_slot:
                set_digest(s, n->digest());
                return;
            case Skel::K::leaf_slot:
                switch (n->kind()) {
                    case pads::NodeKind::leaf:
                        set_value(s, n->value());
                        break;
                    case pads::NodeKind::empty:
                        set_value(s, StateValue());
                        break;
                    default:
                        break;  // stub: no information
                }
                return;
            case Skel::K::internal:
                switch (n->kind()) {
                    case pads::NodeKind::internal:
                        fill_from_pads(*s.left, n->left().get(), depth + 1);
                        fill_from_pads(*s.right, n->right().get(), depth + 1);
                        break;
                    case pads::NodeKind::empty:
                        fill_empty(s, depth);
                        break;
                    default:
                        break;  // stub: nothing materialized below
                }
                return;
        }
    }

    /* The source tree is all-null here: every slot below is empty/null. */
    void fill_empty(Skel& s, int depth) {
        switch (s.kind) {
            case Skel::K::stub_slot:
                set_digest(s, pads::empty_digest(tree->width - depth, tree->digest_bytes));
                return;
            case Skel::K::leaf_slot:
                set_value(s, StateValue());
                return;
            case Skel::K::internal:
                fill_empty(*s.left, depth + 1);
                fill_empty(*s.right, depth + 1);
                return;
        }
    }

    void fill_from_witness(Skel& root, const ElementWitness& w) {
        if (unset == 0) return;
        Skel* cur = &root;
        const int width = w.key.width();
        for (int depth = 0; depth < width; ++depth) {
            bool right = w.key.bit(depth);
            Skel* next = (right ? cur->right : cur->left).get();
            Skel* sib = (right ? cur->left : cur->right).get();
            const Digest& sib_digest = w.proof.path[size_t(width - 1 - depth)].sibling;
            if (sib->kind == Skel::K::stub_slot) set_digest(*sib, sib_digest);
            cur = next;
        }
        if (cur->kind == Skel::K::leaf_slot) set_value(*cur, w.value);
    }

    pads::NodeRef materialize(const Skel& s, int depth) const {
        int height = tree->width - depth;
        switch (s.kind) {
            case Skel::K::stub_slot:
                return pads::Node::stub(*s.digest, height, tree->digest_bytes);
            case Skel::K::leaf_slot:
                return pads::Node::leaf(*s.value, tree->digest_bytes);
            case Skel::K::internal:
                return pads::Node::internal(materialize(*s.left, depth + 1),
                                            materialize(*s.right, depth + 1));
        }
        throw InternalInconsistency("unreachable");
    }
};

}  // namespace

Pads backward_fill(const TruncatedChain& chain, uint64_t target_index,
                   std::span<const ElementWitness* const> witnesses,
                   const std::vector<StateKey>& keys) {
    const pads::TreeParams& tree = chain.params().tree;
    if (target_index > chain.head_index() + 1) throw Error("fill target beyond head");
    if (keys.empty()) {
        uint64_t newest = target_index == 0 ? 0 : target_index - 1;
        return Pads(pads::Node::stub(chain.pi_at(newest).root(), tree.width,
                                     tree.digest_bytes),
                    tree);
    }

    Fill fill{&tree};
    Skel root;
    for (const StateKey& k : keys) {
        if (k.width() != tree.width) throw WidthMismatch("fill key width mismatch");
        fill.insert_path(root, k);
    }
    fill.close(root);

    std::vector<std::vector<const ElementWitness*>> by_pivot;  // indexed by target - pivot
    by_pivot.resize(size_t(target_index - chain.window_start()) + 1);
    for (const ElementWitness* w : witnesses) {
        if (w->pivot_index > target_index) continue;  // newer than the target state
        if (w->pivot_index < chain.window_start()) continue;
        by_pivot[size_t(target_index - w->pivot_index)].push_back(w);
    }

    for (const ElementWitness* w : by_pivot[0]) fill.fill_from_witness(root, *w);
    for (uint64_t x = target_index; x-- > chain.window_start() && fill.unset > 0;) {
        fill.fill_from_pads(root, chain.pi_at(x).root_node().get(), 0);
        if (fill.unset == 0) break;
        for (const ElementWitness* w : by_pivot[size_t(target_index - x)])
            fill.fill_from_witness(root, *w);
    }

    if (fill.unset > 0) throw Unfillable(std::to_string(fill.unset) + " nodes not recoverable");
    return Pads(fill.materialize(root, 0), tree);
}

Pads TruncatedChain::build_tau(const std::vector<Transaction>& selected) const {
    std::set<StateKey> keys;
    std::vector<const ElementWitness*> wits;
    for (const Transaction& tx : selected) {
        for (const StateKey& k : tx.involved()) keys.insert(k);
        for (const ElementWitness& w : tx.witnesses) wits.push_back(&w);
    }
    return backward_fill(*this, head_ + 1, wits,
                         std::vector<StateKey>(keys.begin(), keys.end()));
}

/* ---- block production and validation ---- */

MakeBlockResult TruncatedChain::make_block(const std::deque<Transaction>& mempool_fifo,
                                           int max_txs, const SignatureScheme& scheme) const {
    const size_t dlen = params_.tree.digest_bytes;
    MakeBlockResult res{Block(head_ + 1, head_digest(), {},
                              Pads(pads::Node::stub(pi_at(head_).root(), params_.tree.width,
                                                    dlen),
                                   params_.tree)),
                        0, 0, 0, {}};

    std::vector<Transaction> selected;
    for (const Transaction& tx : mempool_fifo) {
        if (int(selected.size()) >= max_txs) break;
        bool stale = false, bad = false;
        std::set<StateKey> witnessed;
        for (const ElementWitness& w : tx.witnesses) {
            switch (verify_witness(w)) {
                case WitnessStatus::valid:
                    witnessed.insert(w.key);
                    break;
                case WitnessStatus::stale:
                    stale = true;
                    break;
                case WitnessStatus::invalid:
                    bad = true;
                    break;
            }
        }
        auto keys = tx.involved();
        if (!stale && !bad && witnessed != std::set<StateKey>(keys.begin(), keys.end()))
            bad = true;
        if (stale) {
            ++res.stale_witness_drops;
            res.dropped_tx_ids.push_back(tx_id(tx, dlen));
        } else if (bad) {
            ++res.invalid_witness_drops;
            res.dropped_tx_ids.push_back(tx_id(tx, dlen));
        } else {
            selected.push_back(tx);
        }
    }
    if (selected.empty()) return res;

    Pads tau = build_tau(selected);
    if (tau.root() != pi_at(head_).root())
        throw InternalInconsistency("assembled tau root diverges from head post-state");

    std::map<StateKey, StateValue> values;
    for (const Transaction& tx : selected)
        for (const StateKey& k : tx.involved()) {
            if (!values.count(k)) values[k] = *pads::lookup_value(tau, k);
        }

    std::vector<Transaction> valid;
    for (const Transaction& tx : selected) {
        auto ws = execute_transaction(tx, values, scheme, dlen);
        if (!ws) {
            ++res.invalid_execution_drops;
            res.dropped_tx_ids.push_back(tx_id(tx, dlen));
            continue;
        }
        for (auto& [k, v] : *ws) values[k] = v;
        valid.push_back(tx);
        valid.back().witnesses.clear();  // blocks carry transactions bare
    }
    if (valid.empty()) return res;

    std::set<StateKey> kept;
    for (const Transaction& tx : valid)
        for (const StateKey& k : tx.involved()) kept.insert(k);
    if (kept.size() != values.size()) tau = pads::prune(tau, kept);

    res.block = Block(head_ + 1, head_digest(), std::move(valid), std::move(tau));
    return res;
}

/* Executes every transaction sequentially against tau's values; throws the
   verdict on failure, returns the post-state tree. */
Pads TruncatedChain::execute_block_or_throw(const Block& b, const SignatureScheme& scheme) const {
    std::set<StateKey> keys;
    for (const Transaction& tx : b.txs)
        for (const StateKey& k : tx.involved()) keys.insert(k);

    for (const StateKey& k : keys)
        if (k.width() != params_.tree.width || !pads::is_provable(b.tau, k))
            throw Verdict::bad_tau_shape;
    /* The genesis block carries the full allocation tree rather than a pruned
       one, so the minimal-shape rule applies only from block 1 on. */
    if (b.index != 0) {
        try {
            if (!pads::structurally_equal(pads::prune(b.tau, keys), b.tau))
                throw Verdict::bad_tau_shape;
        } catch (const Error&) {
            throw Verdict::bad_tau_shape;
        }
    }

    std::map<StateKey, StateValue> values;
    for (const StateKey& k : keys) values[k] = *pads::lookup_value(b.tau, k);

    WriteSet cumulative;
    for (const Transaction& tx : b.txs) {
        auto ws = execute_transaction(tx, values, scheme, params_.tree.digest_bytes);
        if (!ws) throw Verdict::bad_tx_execution;
        for (auto& [k, v] : *ws) {
            values[k] = v;
            cumulative[k] = v;
        }
    }
    return pads::apply_writes(b.tau, cumulative);
}

Verdict TruncatedChain::validate_block(const Block& b, const SignatureScheme& scheme) const {
    if (b.index != head_ + 1) return Verdict::bad_chain;
    if (b.parent != head_digest()) return Verdict::bad_chain;
    if (b.header != block_header_digest(b.index, b.parent, b.txs, b.tau))
        return Verdict::bad_chain;
    if (!(b.tau.params() == params_.tree)) return Verdict::bad_tau_shape;
    if (b.tau.root() != pi_at(head_).root()) return Verdict::bad_tau_root;
    try {
        execute_block_or_throw(b, scheme);
    } catch (Verdict v) {
        return v;
    }
    return Verdict::ok;
}

AppendResult TruncatedChain::append_block(const Block& b, const SignatureScheme& scheme) {
    Verdict v = validate_block(b, scheme);
    if (v != Verdict::ok) throw Error(std::string("append of invalid block: ") + verdict_name(v));
    Pads pi = execute_block_or_throw(b, scheme);

    uint64_t old_pivot = pivot_index();
    blocks_.push_back(b);
    pis_.push_back(std::move(pi));
    head_ = b.index;
    while (blocks_.size() > size_t(params_.window_blocks())) {
        blocks_.pop_front();
        pis_.pop_front();
    }

    AppendResult res{head_, pivot_index(), std::nullopt};
    if (res.pivot == old_pivot + 1 && in_window(res.pivot - 1))
        res.pivot_tau_bar = pi_at(res.pivot - 1);
    return res;
}

TruncatedChain TruncatedChain::rewound_to(uint64_t index) const {
    if (!in_window(index)) throw Error("rewind target outside window");
    TruncatedChain out(*this);
    while (out.head_ > index) {
        out.blocks_.pop_back();
        out.pis_.pop_back();
        --out.head_;
    }
    return out;
}

TruncatedChain TruncatedChain::from_window(const ChainParams& params,
                                           std::span<const Block> window,
                                           const SignatureScheme& scheme) {
    params.validate();
    if (window.empty()) throw SyncError("empty window");
    TruncatedChain chain;
    chain.params_ = params;
    chain.head_ = window.front().index;
    chain.blocks_.push_back(window.front());
    try {
        chain.pis_.push_back(chain.execute_block_or_throw(window.front(), scheme));
    } catch (Verdict v) {
        throw SyncError(std::string("anchor block rejected: ") + verdict_name(v));
    }
    for (const Block& b : window.subspan(1)) {
        Verdict v = chain.validate_block(b, scheme);
        if (v != Verdict::ok)
            throw SyncError("block " + std::to_string(b.index) + " rejected: " +
                            verdict_name(v));
        chain.append_block(b, scheme);
    }
    return chain;
}

size_t fork_choice(std::span<const ChainView> views, int f) {
    if (views.empty()) throw Error("fork_choice with no candidates");
    for (const ChainView& v : views)
        if (v.divergence > uint64_t(f))
            throw BranchTooLong("branch diverges by " + std::to_string(v.divergence));
    size_t best = 0;
    for (size_t i = 1; i < views.size(); ++i) {
        if (views[i].head_index > views[best].head_index ||
            (views[i].head_index == views[best].head_index &&
             views[i].head_digest < views[best].head_digest))
            best = i;
    }
    return best;
}

}  // namespace dhtchain::ledger
