#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "dhtchain/pads.hpp"

namespace dhtchain::ledger {

using pads::Pads;
using pads::StateKey;
using pads::StateMap;
using pads::StateValue;
using pads::WriteSet;

struct ChainParams {
    int d = 8;   // propagation margin, in blocks
    int f = 12;  // rollback horizon, in blocks
    double block_time = 15.0;
    pads::TreeParams tree;

    int window_blocks() const { return d + f; }
    void validate() const;
};

/* A state element plus the proof that ties it to the pre-state root of
   block pivot_index. Witnesses travel with transactions unsigned; anyone
   can refresh them. */
struct ElementWitness {
    StateKey key;
    StateValue value;
    pads::Proof proof;
    uint64_t pivot_index = 0;
};

enum class TxKind : uint8_t { transfer = 1, generic = 2 };

struct Transaction {
    TxKind kind = TxKind::transfer;

    // transfer
    StateKey from, to;
    uint64_t amount = 0;

    // generic: reads are untouched inputs, writes get a deterministic
    // keyed-hash update
    std::vector<StateKey> reads, writes;
    uint64_t salt = 0;

    std::vector<ElementWitness> witnesses;  // sorted by key, one per involved key
    Bytes signature;

    std::vector<StateKey> involved() const;
};

Bytes tx_body(const Transaction& tx);
Digest tx_id(const Transaction& tx, size_t digest_bytes);

/* Signature scheme over transaction bodies. The default test scheme is a
   keyed hash: the signing secret for an account is its key's bit pattern. */
class SignatureScheme {
public:
    virtual ~SignatureScheme() = default;
    virtual Bytes sign(ByteSpan body, const StateKey& owner) const = 0;
    virtual bool verify(ByteSpan body, const StateKey& owner, ByteSpan sig) const = 0;
};

class KeyedHashScheme final : public SignatureScheme {
public:
    explicit KeyedHashScheme(size_t digest_bytes = kDefaultDigestBytes)
        : digest_bytes_(digest_bytes) {}
    Bytes sign(ByteSpan body, const StateKey& owner) const override;
    bool verify(ByteSpan body, const StateKey& owner, ByteSpan sig) const override;

private:
    size_t digest_bytes_;
};

void sign_transaction(Transaction& tx, const SignatureScheme& scheme);

/* Balances are 8-byte big-endian payloads. A null value decodes to balance
   zero; an explicit zero balance stays distinguishable from an unused
   element by its encoding. */
std::optional<uint64_t> decode_balance(const StateValue& v);
StateValue encode_balance(uint64_t amount);

/* nullopt means the transaction is invalid under the given values. */
std::optional<WriteSet> execute_transaction(const Transaction& tx,
                                            const std::map<StateKey, StateValue>& values,
                                            const SignatureScheme& scheme,
                                            size_t digest_bytes);

struct Block {
    uint64_t index = 0;
    Digest parent;
    std::vector<Transaction> txs;  // stored without witnesses
    Pads tau;                      // pre-state tree for this block's elements
    Digest header;

    Block(uint64_t index, Digest parent, std::vector<Transaction> txs, Pads tau);
};

Digest block_header_digest(uint64_t index, const Digest& parent,
                           const std::vector<Transaction>& txs, const Pads& tau);

Bytes encode_witness(const ElementWitness& w, const pads::TreeParams& params);
ElementWitness decode_witness(ByteReader& r, const pads::TreeParams& params);

Bytes encode_tx(const Transaction& tx, const pads::TreeParams& params);   // with witnesses
Transaction decode_tx(ByteSpan data, const pads::TreeParams& params);

Bytes encode_block(const Block& b);
Block decode_block(ByteSpan data, const pads::TreeParams& params);

enum class WitnessStatus { valid, invalid, stale };

enum class Verdict { ok, bad_chain, bad_tau_root, bad_tau_shape, bad_tx_execution };

const char* verdict_name(Verdict v);

struct MakeBlockResult {
    Block block;
    int stale_witness_drops = 0;
    int invalid_witness_drops = 0;
    int invalid_execution_drops = 0;
    std::vector<Digest> dropped_tx_ids;
};

struct AppendResult {
    uint64_t head;
    uint64_t pivot;
    /* Post-state tree of the block just before the new pivot; what storage
       nodes fold in when the pivot advances. */
    std::optional<Pads> pivot_tau_bar;
};

/* Validator view: the last d+f blocks with their cached post-state trees.
   Block b's tau is its pre-state over the elements it touches; pi is the
   same tree after the block's writes. */
class TruncatedChain {
public:
    static TruncatedChain genesis(const ChainParams& params, const StateMap& allocation);
    static TruncatedChain from_window(const ChainParams& params, std::span<const Block> window,
                                      const SignatureScheme& scheme);

    const ChainParams& params() const { return params_; }
    uint64_t head_index() const { return head_; }
    const Digest& head_digest() const { return blocks_.back().header; }
    uint64_t window_start() const;
    size_t window_size() const { return blocks_.size(); }
    uint64_t pivot_index() const;

    bool in_window(uint64_t index) const;
    const Block& block_at(uint64_t index) const;
    const Pads& tau_at(uint64_t index) const;
    const Pads& pi_at(uint64_t index) const;

    WitnessStatus verify_witness(const ElementWitness& w) const;

    /* Reassemble the pre-state tree for the union of the selected
       transactions' elements by backward fill: newest sources win, starting
       from cached post-state trees, then same-age witness proofs. */
    Pads build_tau(const std::vector<Transaction>& selected) const;

    MakeBlockResult make_block(const std::deque<Transaction>& mempool_fifo, int max_txs,
                               const SignatureScheme& scheme) const;

    Verdict validate_block(const Block& b, const SignatureScheme& scheme) const;

    AppendResult append_block(const Block& b, const SignatureScheme& scheme);

    TruncatedChain rewound_to(uint64_t index) const;

private:
    TruncatedChain() = default;

    Pads execute_block_or_throw(const Block& b, const SignatureScheme& scheme) const;

    ChainParams params_;
    std::deque<Block> blocks_;
    std::deque<Pads> pis_;
    uint64_t head_ = 0;
};

/* General backward fill, target_index = 1 + newest usable block. Witnesses
   with pivots newer than the target are ignored. Used for block assembly
   (target = head + 1) and storage rebuild (target = pivot). */
Pads backward_fill(const TruncatedChain& chain, uint64_t target_index,
                   std::span<const ElementWitness* const> witnesses,
                   const std::vector<StateKey>& keys);

struct ChainView {
    uint64_t head_index = 0;
    Digest head_digest;
    uint64_t divergence = 0;  // blocks since the common ancestor
};

/* Longest chain wins; ties go to the lexicographically smallest head
   digest. Returns the index of the winning view. */
size_t fork_choice(std::span<const ChainView> views, int f);

}  // namespace dhtchain::ledger
