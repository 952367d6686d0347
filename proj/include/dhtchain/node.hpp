#pragma once

#include <deque>
#include <map>
#include <optional>
#include <set>

#include "dhtchain/dht.hpp"
#include "dhtchain/ledger.hpp"

namespace dhtchain::node {

using dht::NodeId;
using dht::StateKey;
using ledger::Block;
using ledger::Transaction;

struct NodeConfig {
    NodeId id;
    ledger::ChainParams chain;
    int replication = 3;
    int bucket_capacity = 16;
    bool storage_enabled = true;
};

/* Resolves a key to a fresh witness over the dht. hops accumulates the
   transport cost of everything the fetch did. */
class WitnessFetcher {
public:
    virtual ~WitnessFetcher() = default;
    virtual std::optional<ledger::ElementWitness> fetch(const StateKey& key, int& hops) = 0;
};

enum class BlockOutcome {
    accepted,
    duplicate,
    stale_height,
    rejected,
    branch_stored,
    reorged,
    need_sync,
};

struct BlockReport {
    BlockOutcome outcome;
    int appended = 0;
    std::optional<ledger::Verdict> verdict;
};

struct NodeCounters {
    uint64_t blocks_accepted = 0;
    uint64_t blocks_rejected = 0;
    uint64_t reorgs = 0;
    uint64_t reorg_depth_max = 0;
    uint64_t mempool_purged_mined = 0;
    uint64_t mempool_purged_stale = 0;
    uint64_t storage_refreshes = 0;
};

/* One simulated participant: a validator with its truncated window, a
   routing table, an optional storage role, and a mempool. Network and
   timing live outside; these methods are what events call into. */
class SimNode {
public:
    SimNode(NodeConfig cfg, const ledger::StateMap& allocation,
            const ledger::SignatureScheme& scheme);

    const NodeId& id() const { return cfg_.id; }
    const NodeConfig& config() const { return cfg_; }
    bool online() const { return online_; }
    void set_online(bool v) { online_ = v; }

    const ledger::TruncatedChain& chain() const { return chain_; }
    dht::RoutingTable& table() { return table_; }
    const dht::RoutingTable& table() const { return table_; }

    bool has_storage() const { return storage_.has_value(); }
    dht::StorageState& storage() { return *storage_; }
    const dht::StorageState& storage() const { return *storage_; }

    const std::deque<Transaction>& mempool() const { return mempool_; }
    const NodeCounters& counters() const { return counters_; }

    /* Assemble, witness and sign a transaction. nullopt if any witness
       could not be fetched. */
    std::optional<Transaction> create_transfer(const StateKey& from, const StateKey& to,
                                               uint64_t amount, WitnessFetcher& fetch,
                                               int& hops);
    std::optional<Transaction> create_generic(std::vector<StateKey> reads,
                                              std::vector<StateKey> writes, uint64_t salt,
                                              WitnessFetcher& fetch, int& hops);

    bool accept_tx(Transaction tx);

    ledger::MakeBlockResult mine(int max_txs) const;
    void drop_mined(const ledger::MakeBlockResult& made);

    BlockReport on_block(const Block& b);

    /* Full window as length-prefixed encoded blocks, oldest first. */
    Bytes encode_window() const;
    /* Replace the chain with a decoded window. Clears mempool, side blocks
       and the storage role; storage must be rebuilt afterwards. */
    size_t sync_from(ByteSpan window_bytes);

    /* Storage bootstrap from a locally derivable pivot tree (genesis). */
    void init_storage(std::set<StateKey> keys);
    /* Storage rebuild from fetched witnesses after a sync. */
    bool rebuild_storage(std::set<StateKey> keys, WitnessFetcher& fetch);
    void drop_storage() { storage_.reset(); }

private:
    std::optional<Transaction> attach_witnesses(Transaction tx, WitnessFetcher& fetch,
                                                int& hops);
    void apply_append(const Block& b);
    void purge_mempool_for(const Block& b);
    int drain_side_blocks();
    BlockReport try_branch(const Block& tip);

    NodeConfig cfg_;
    const ledger::SignatureScheme* scheme_;
    ledger::TruncatedChain chain_;
    dht::RoutingTable table_;
    std::optional<dht::StorageState> storage_;
    std::deque<Transaction> mempool_;
    std::set<Digest> seen_txs_;
    std::map<Digest, Block> side_blocks_;
    bool online_ = true;
    NodeCounters counters_;
};

}  // namespace dhtchain::node
