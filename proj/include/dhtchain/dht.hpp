#pragma once

#include <optional>
#include <set>
#include <span>
#include <vector>

#include "dhtchain/bits.hpp"
#include "dhtchain/ledger.hpp"
#include "dhtchain/pads.hpp"

namespace dhtchain::dht {

using NodeId = BitKey;
using pads::Pads;
using pads::StateKey;

/* The replication closest ids to the target by XOR distance, closest first.
   Ids are assumed unique, so distances never tie. */
std::vector<NodeId> authority_set(const BitKey& target, std::span<const NodeId> ids,
                                  int replication);

/* Peers bucketed by shared prefix length with the local id. A full bucket
   keeps the entries nearest to the local id, which makes table contents a
   pure function of the peer set. */
class RoutingTable {
public:
    RoutingTable() = default;
    RoutingTable(NodeId self, int bucket_capacity);

    const NodeId& self() const { return self_; }
    bool insert(const NodeId& id);
    bool erase(const NodeId& id);
    bool contains(const NodeId& id) const;
    size_t size() const;

    std::vector<NodeId> closest(const BitKey& target, size_t count) const;

    size_t bucket_count() const { return buckets_.size(); }
    size_t bucket_size(size_t i) const { return buckets_[i].size(); }

private:
    NodeId self_;
    int capacity_ = 16;
    std::vector<std::vector<NodeId>> buckets_;
};

/* Transport the lookup walks over. A query against an offline peer costs a
   hop and teaches nothing. */
class Network {
public:
    virtual ~Network() = default;
    virtual bool online(const NodeId& id) const = 0;
    virtual std::vector<NodeId> find_closest(const NodeId& peer, const BitKey& target,
                                             size_t count) const = 0;
};

struct LookupResult {
    NodeId node;
    int hops = 0;
};

struct LookupParams {
    size_t fanout = 16;
    int max_steps = 512;
};

/* Iterative lookup: repeatedly query the closest unqueried candidate and
   learn its neighbourhood, until nothing unqueried is closer than the best
   responder. Returns the closest online node found; nullopt if nobody
   answered. */
std::optional<LookupResult> find_node(const Network& net, const RoutingTable& origin,
                                      const BitKey& target, const LookupParams& p = {});

/* What a storage node holds: the pivot pre-state tree pruned down to the
   keys it is responsible for. */
struct StorageState {
    Pads tree;
    uint64_t pivot_index = 0;
    std::set<StateKey> stored;

    bool stores(const StateKey& key) const { return stored.count(key) > 0; }
    ledger::ElementWitness witness_for(const StateKey& key) const;
};

StorageState make_storage(const Pads& tau_pivot, uint64_t pivot_index, std::set<StateKey> keys);

/* Folds the post-state tree of the block entering the pivot into the stored
   tree, then prunes back to the stored keys. Returns false (and does
   nothing) unless new_pivot is exactly one past the stored pivot. Throws
   RootMismatch if the overlap disagrees. */
bool advance_storage(StorageState& s, const Pads& pivot_tau_bar, uint64_t new_pivot);

}  // namespace dhtchain::dht
