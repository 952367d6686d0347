#pragma once

#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <string>
#include <variant>
#include <vector>

#include "dhtchain/node.hpp"
#include "dhtchain/rng.hpp"

namespace dhtchain::simnet {

using ledger::Block;
using ledger::Transaction;
using pads::StateKey;

struct ChurnEvent {
    int node = 0;
    uint64_t leave_slot = 0;
    uint64_t rejoin_slot = 0;
};

/* Flat key = value scenario description. parse() accepts '#' comments and
   blank lines and rejects unknown keys; echo() reproduces the canonical
   form, which is what run traces embed. */
struct ScenarioConfig {
    int nodes = 16;
    std::vector<int> storage_opt_out;
    int width = 16;
    int digest_bytes = 20;
    int d = 8;
    int f = 12;
    double block_time = 15.0;
    int replication = 3;
    int bucket_capacity = 16;
    int accounts = 64;
    int data_elements = 64;
    uint64_t initial_balance = 1000000;
    uint64_t blocks = 100;
    int max_txs_per_block = 90;
    int tx_per_slot = 10;
    double generic_ratio = 0.0;
    int elements_min = 3;
    int elements_max = 5;
    uint64_t max_transfer_amount = 100;
    double dht_hop_delay = 0.05;
    double propagation_delay = 0.5;
    double propagation_jitter = 0.1;
    uint64_t fork_at = 0;
    uint64_t fork_len = 0;
    std::vector<ChurnEvent> churn;
    uint64_t seed = 1;
    bool oracle_check = true;

    static ScenarioConfig parse(std::string_view text);
    std::string echo() const;
    void validate() const;
    ledger::ChainParams chain_params() const;
};

struct RunMetrics {
    std::map<std::string, uint64_t> values;

    uint64_t get(const std::string& name) const;
    std::string text() const;
};

/* Single-threaded discrete event simulation. Slot k's block is mined at
   k * block_time; transaction intents land inside the preceding slot;
   deliveries carry dht and propagation delays. Everything is driven by
   seeded substreams, so a (config, seed) pair fully determines the trace. */
class Simulation {
public:
    explicit Simulation(ScenarioConfig cfg);
    ~Simulation();

    void run();

    const ScenarioConfig& config() const { return cfg_; }
    const RunMetrics& metrics() const { return metrics_; }
    /* Config echo, record lines, and a closing digest over the lot. */
    std::string trace_text() const;

    size_t node_count() const { return nodes_.size(); }
    const node::SimNode& node_at(size_t i) const { return *nodes_[i]; }
    const node::SimNode& observer() const { return *observer_; }
    const std::map<uint64_t, Block>& archive() const { return archive_; }
    const std::vector<StateKey>& account_keys() const { return accounts_; }
    const std::vector<StateKey>& data_keys() const { return data_keys_; }

private:
    struct EvTx {
        uint64_t slot;
    };
    struct EvTxDeliver {
        Transaction tx;
    };
    struct EvMine {
        uint64_t slot;
    };
    struct EvBlock {
        Block block;
        int skip_node;
    };
    struct EvLeave {
        int node;
    };
    struct EvJoin {
        int node;
    };
    using Payload = std::variant<EvTx, EvTxDeliver, EvMine, EvBlock, EvLeave, EvJoin>;

    struct Event {
        double t;
        uint64_t seq;
        Payload payload;
    };
    struct EventAfter {
        bool operator()(const Event& a, const Event& b) const {
            return a.t != b.t ? a.t > b.t : a.seq > b.seq;
        }
    };

    struct Fetcher;
    struct Net;

    void push(double t, Payload p);
    void record(double t, int node, const std::string& ev, uint64_t size);
    void bump(const std::string& name, uint64_t by = 1);
    void bump_max(const std::string& name, uint64_t v);

    std::vector<dht::NodeId> online_storer_ids() const;
    node::SimNode* by_id(const dht::NodeId& id) const;
    std::set<StateKey> authority_keys_for(const dht::NodeId& id,
                                          std::span<const dht::NodeId> storer_ids) const;
    std::optional<ledger::ElementWitness> fetch_witness(node::SimNode& issuer,
                                                        const StateKey& key, int& hops);
    void sync_node(double t, int idx);

    void handle_tx(double t, const EvTx& ev);
    void handle_tx_deliver(const EvTxDeliver& ev);
    void handle_mine(double t, const EvMine& ev);
    void handle_block(double t, const EvBlock& ev);
    void handle_leave(double t, const EvLeave& ev);
    void handle_join(double t, const EvJoin& ev);

    void deliver_block(double t, const Block& b, int proposer_index);
    void absorb_mine_result(double t, int proposer_index, const ledger::MakeBlockResult& made);
    void observer_take(const Block& b);
    void replay_checks();

    ScenarioConfig cfg_;
    ledger::ChainParams params_;
    ledger::KeyedHashScheme scheme_;

    std::vector<StateKey> accounts_;
    std::vector<StateKey> data_keys_;
    std::vector<std::unique_ptr<node::SimNode>> nodes_;
    std::unique_ptr<node::SimNode> observer_;
    std::map<dht::NodeId, int> id_index_;
    std::map<uint64_t, Block> archive_;

    std::priority_queue<Event, std::vector<Event>, EventAfter> events_;
    uint64_t seq_ = 0;

    Rng workload_;
    Rng proposer_rng_;
    Rng net_rng_;

    std::optional<ledger::TruncatedChain> fork_a_, fork_b_;

    RunMetrics metrics_;
    std::vector<std::string> trace_;
    bool ran_ = false;
};

}  // namespace dhtchain::simnet
