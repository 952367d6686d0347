#include "dhtchain/simnet.hpp"

#include <algorithm>
#include <cstdio>

#include "dhtchain/errors.hpp"

namespace dhtchain::simnet {

using node::SimNode;

/* ---- hosts the lookup and witness machinery run against ---- */

struct Simulation::Net : dht::Network {
    const Simulation& sim;
    explicit Net(const Simulation& s) : sim(s) {}

    bool online(const dht::NodeId& id) const override {
        const SimNode* n = sim.by_id(id);
        return n && n->online();
    }

    std::vector<dht::NodeId> find_closest(const dht::NodeId& peer, const BitKey& target,
                                          size_t count) const override {
        const SimNode* n = sim.by_id(peer);
        if (!n || !n->online()) return {};
        return n->table().closest(target, count);
    }
};

struct Simulation::Fetcher : node::WitnessFetcher {
    Simulation& sim;
    SimNode* issuer;
    int per_fetch_max = 0;

    Fetcher(Simulation& s, SimNode* i) : sim(s), issuer(i) {}

    std::optional<ledger::ElementWitness> fetch(const StateKey& key, int& hops) override {
        int h = 0;
        auto w = sim.fetch_witness(*issuer, key, h);
        hops += h;
        per_fetch_max = std::max(per_fetch_max, h);
        sim.bump("witness_fetches");
        sim.bump("witness_hops_total", uint64_t(h));
        sim.bump_max("witness_hops_max", uint64_t(h));
        if (!w) sim.bump("witness_misses");
        return w;
    }
};

/* ---- construction ---- */

Simulation::Simulation(ScenarioConfig cfg)
    : cfg_(std::move(cfg)),
      params_(cfg_.chain_params()),
      scheme_(size_t(cfg_.digest_bytes)),
      workload_(Rng::substream(cfg_.seed, "workload")),
      proposer_rng_(Rng::substream(cfg_.seed, "proposer")),
      net_rng_(Rng::substream(cfg_.seed, "net")) {
    cfg_.validate();

    std::set<BitKey> taken;
    auto derive = [&](std::string_view tag, uint64_t i) {
        for (uint64_t salt = 0;; ++salt) {
            ByteWriter w;
            w.raw(ByteSpan(reinterpret_cast<const uint8_t*>(tag.data()), tag.size()));
            w.be64(i);
            w.be64(salt);
            Bytes h = sha256({ByteSpan(w.bytes())});
            Bytes packed(h.begin(), h.begin() + (cfg_.width + 7) / 8);
            if (cfg_.width % 8 != 0)
                packed.back() &= uint8_t(0xff << (8 - cfg_.width % 8));
            BitKey key(std::move(packed), cfg_.width);
            if (taken.insert(key).second) return key;
        }
    };

    for (int i = 0; i < cfg_.accounts; ++i) accounts_.push_back(derive("account", uint64_t(i)));
    for (int i = 0; i < cfg_.data_elements; ++i)
        data_keys_.push_back(derive("data", uint64_t(i)));
    std::vector<dht::NodeId> ids;
    for (int i = 0; i < cfg_.nodes; ++i) ids.push_back(derive("node", uint64_t(i)));
    dht::NodeId observer_id = derive("observer", 0);

    ledger::StateMap allocation;
    for (const StateKey& k : accounts_) allocation[k] = ledger::encode_balance(cfg_.initial_balance);

    std::set<int> opted(cfg_.storage_opt_out.begin(), cfg_.storage_opt_out.end());
    for (int i = 0; i < cfg_.nodes; ++i) {
        node::NodeConfig nc{ids[size_t(i)], params_, cfg_.replication, cfg_.bucket_capacity,
                            opted.count(i) == 0};
        nodes_.push_back(std::make_unique<SimNode>(std::move(nc), allocation, scheme_));
        id_index_[ids[size_t(i)]] = i;
    }
    observer_ = std::make_unique<SimNode>(
        node::NodeConfig{observer_id, params_, cfg_.replication, cfg_.bucket_capacity, false},
        allocation, scheme_);

    std::vector<dht::NodeId> storers;
    for (int i = 0; i < cfg_.nodes; ++i)
        if (nodes_[size_t(i)]->config().storage_enabled) storers.push_back(ids[size_t(i)]);
    for (int i = 0; i < cfg_.nodes; ++i)
        for (const dht::NodeId& sid : storers)
            if (sid != ids[size_t(i)]) nodes_[size_t(i)]->table().insert(sid);

    std::map<dht::NodeId, std::set<StateKey>> assignment;
    auto assign = [&](const StateKey& k) {
        for (const dht::NodeId& id : dht::authority_set(k, storers, cfg_.replication))
            assignment[id].insert(k);
    };
    for (const StateKey& k : accounts_) assign(k);
    for (const StateKey& k : data_keys_) assign(k);
    for (int i = 0; i < cfg_.nodes; ++i) {
        if (!nodes_[size_t(i)]->config().storage_enabled) continue;
        nodes_[size_t(i)]->init_storage(std::move(assignment[ids[size_t(i)]]));
    }

    archive_.emplace(0, observer_->chain().block_at(0));
}

Simulation::~Simulation() = default;

/* ---- small helpers ---- */

void Simulation::push(double t, Payload p) { events_.push(Event{t, seq_++, std::move(p)}); }

void Simulation::record(double t, int node, const std::string& ev, uint64_t size) {
    char buf[192];
    std::snprintf(buf, sizeof buf, "record t=%.3f node=%d ev=%s size=%llu", t, node, ev.c_str(),
                  static_cast<unsigned long long>(size));
    trace_.push_back(buf);
}

void Simulation::bump(const std::string& name, uint64_t by) { metrics_.values[name] += by; }

void Simulation::bump_max(const std::string& name, uint64_t v) {
    uint64_t& cur = metrics_.values[name];
    cur = std::max(cur, v);
}

std::vector<dht::NodeId> Simulation::online_storer_ids() const {
    std::vector<dht::NodeId> out;
    for (const auto& n : nodes_)
        if (n->online() && n->has_storage()) out.push_back(n->id());
    return out;
}

SimNode* Simulation::by_id(const dht::NodeId& id) const {
    auto it = id_index_.find(id);
    return it == id_index_.end() ? nullptr : nodes_[size_t(it->second)].get();
}

std::set<StateKey> Simulation::authority_keys_for(const dht::NodeId& id,
                                                  std::span<const dht::NodeId> storer_ids) const {
    std::set<StateKey> keys;
    auto consider = [&](const StateKey& k) {
        auto auth = dht::authority_set(k, storer_ids, cfg_.replication);
        if (std::find(auth.begin(), auth.end(), id) != auth.end()) keys.insert(k);
    };
    for (const StateKey& k : accounts_) consider(k);
    for (const StateKey& k : data_keys_) consider(k);
    return keys;
}

std::optional<ledger::ElementWitness> Simulation::fetch_witness(SimNode& issuer,
                                                                const StateKey& key, int& hops) {
    if (issuer.online() && issuer.has_storage() && issuer.storage().stores(key))
        return issuer.storage().witness_for(key);

    Net net{*this};
    auto found = dht::find_node(net, issuer.table(), key,
                                dht::LookupParams{size_t(cfg_.bucket_capacity), 512});
    if (found) hops += found->hops;

    auto auths = dht::authority_set(key, online_storer_ids(), cfg_.replication);
    for (const dht::NodeId& a : auths) {
        SimNode* srv = by_id(a);
        if (!srv || !srv->online() || !srv->has_storage()) continue;
        if (!(found && found->node == a)) ++hops;
        if (srv->storage().stores(key)) return srv->storage().witness_for(key);
    }
    return std::nullopt;
}

/* ---- event handlers ---- */

void Simulation::handle_tx(double t, const EvTx& ev) {
    (void)ev;
    std::vector<int> online;
    for (int i = 0; i < int(nodes_.size()); ++i)
        if (nodes_[size_t(i)]->online()) online.push_back(i);
    if (online.empty()) {
        bump("txs_skipped_offline");
        return;
    }
    int issuer_idx = online[size_t(workload_.uniform(online.size()))];
    SimNode& issuer = *nodes_[size_t(issuer_idx)];

    Fetcher fetcher{*this, &issuer};
    int hops_total = 0;
    std::optional<Transaction> tx;
    if (workload_.chance(cfg_.generic_ratio)) {
        size_t n = size_t(workload_.range(uint64_t(cfg_.elements_min), uint64_t(cfg_.elements_max)));
        std::set<size_t> picked;
        while (picked.size() < n) picked.insert(size_t(workload_.uniform(data_keys_.size())));
        std::vector<StateKey> writes;
        for (size_t idx : picked) writes.push_back(data_keys_[idx]);
        tx = issuer.create_generic({}, std::move(writes), workload_.next(), fetcher, hops_total);
    } else {
        size_t a = size_t(workload_.uniform(accounts_.size()));
        size_t b = size_t(workload_.uniform(accounts_.size()));
        while (b == a) b = size_t(workload_.uniform(accounts_.size()));
        uint64_t amount = workload_.range(1, cfg_.max_transfer_amount);
        tx = issuer.create_transfer(accounts_[a], accounts_[b], amount, fetcher, hops_total);
    }

    if (!tx) {
        bump("txs_unavailable");
        record(t, issuer_idx, "unavailable", 0);
        return;
    }
    Bytes wire = ledger::encode_tx(*tx, params_.tree);
    bump("txs_submitted");
    bump("tx_bytes_total", wire.size());
    bump_max("tx_bytes_max", wire.size());
    record(t, issuer_idx, "issue", wire.size());

    double dt = double(fetcher.per_fetch_max) * cfg_.dht_hop_delay + cfg_.propagation_delay +
                cfg_.propagation_jitter * net_rng_.unit();
    push(t + dt, EvTxDeliver{std::move(*tx)});
}

void Simulation::handle_tx_deliver(const EvTxDeliver& ev) {
    for (auto& n : nodes_)
        if (n->online()) n->accept_tx(ev.tx);
}

void Simulation::observer_take(const Block& b) {
    observer_->on_block(b);
    const auto& c = observer_->chain();
    for (uint64_t h = c.window_start(); h <= c.head_index(); ++h) {
        auto it = archive_.find(h);
        if (it == archive_.end() || it->second.header != c.block_at(h).header)
            archive_.insert_or_assign(h, c.block_at(h));
    }
}

void Simulation::deliver_block(double t, const Block& b, int proposer_index) {
    observer_take(b);
    if (proposer_index >= 0) nodes_[size_t(proposer_index)]->on_block(b);
    double dt = cfg_.propagation_delay + cfg_.propagation_jitter * net_rng_.unit();
    push(t + dt, EvBlock{b, proposer_index});
}

void Simulation::absorb_mine_result(double t, int proposer_index,
                                    const ledger::MakeBlockResult& made) {
    Bytes wire = ledger::encode_block(made.block);
    bump("blocks_total");
    bump("txs_mined", made.block.txs.size());
    bump("txs_dropped_stale", uint64_t(made.stale_witness_drops));
    bump("txs_dropped_invalid_witness", uint64_t(made.invalid_witness_drops));
    bump("txs_dropped_execution", uint64_t(made.invalid_execution_drops));
    bump("block_bytes_total", wire.size());
    bump_max("block_bytes_max", wire.size());
    record(t, proposer_index, "mine", wire.size());
    char buf[160];
    std::snprintf(buf, sizeof buf, "block h=%llu size=%llu digest=%s",
                  static_cast<unsigned long long>(made.block.index),
                  static_cast<unsigned long long>(wire.size()), made.block.header.hex().c_str());
    trace_.push_back(buf);
}

void Simulation::handle_mine(double t, const EvMine& ev) {
    const uint64_t s = ev.slot;
    if (cfg_.fork_at > 0 && s == cfg_.fork_at && !fork_a_) {
        fork_a_ = observer_->chain();
        fork_b_ = observer_->chain();
    }
    if (fork_a_ && s >= cfg_.fork_at + cfg_.fork_len) {
        fork_a_.reset();
        fork_b_.reset();
    }

    std::vector<int> online;
    for (int i = 0; i < int(nodes_.size()); ++i)
        if (nodes_[size_t(i)]->online()) online.push_back(i);
    if (online.empty()) {
        bump("slots_skipped");
        return;
    }
    int p = online[size_t(proposer_rng_.uniform(online.size()))];
    SimNode& prop = *nodes_[size_t(p)];

    if (!fork_a_) {
        ledger::MakeBlockResult made = prop.mine(cfg_.max_txs_per_block);
        prop.drop_mined(made);
        absorb_mine_result(t, p, made);
        deliver_block(t, made.block, p);
        return;
    }

    bump("forks_injected");
    ledger::MakeBlockResult made_a =
        fork_a_->make_block(prop.mempool(), cfg_.max_txs_per_block, scheme_);
    std::deque<Transaction> alt(prop.mempool());
    if (!alt.empty()) alt.pop_front();
    ledger::MakeBlockResult made_b = fork_b_->make_block(alt, cfg_.max_txs_per_block, scheme_);
    prop.drop_mined(made_a);

    fork_a_->append_block(made_a.block, scheme_);
    absorb_mine_result(t, p, made_a);
    deliver_block(t, made_a.block, -1);

    if (made_b.block.header == made_a.block.header) {
        fork_b_ = fork_a_;
        bump("fork_degenerate_slots");
        return;
    }
    fork_b_->append_block(made_b.block, scheme_);
    Bytes wire_b = ledger::encode_block(made_b.block);
    char buf[160];
    std::snprintf(buf, sizeof buf, "block h=%llu size=%llu digest=%s",
                  static_cast<unsigned long long>(made_b.block.index),
                  static_cast<unsigned long long>(wire_b.size()), made_b.block.header.hex().c_str());
    trace_.push_back(buf);
    deliver_block(t, made_b.block, -1);
}

void Simulation::handle_block(double t, const EvBlock& ev) {
    for (int i = 0; i < int(nodes_.size()); ++i) {
        if (i == ev.skip_node || !nodes_[size_t(i)]->online()) continue;
        node::BlockReport rep = nodes_[size_t(i)]->on_block(ev.block);
        if (rep.outcome == node::BlockOutcome::reorged)
            record(t, i, "reorg", uint64_t(rep.appended));
        else if (rep.outcome == node::BlockOutcome::need_sync)
            sync_node(t, i);
    }
}

void Simulation::sync_node(double t, int idx) {
    int peer = -1;
    for (int j = 0; j < int(nodes_.size()); ++j) {
        if (j != idx && nodes_[size_t(j)]->online()) {
            peer = j;
            break;
        }
    }
    if (peer < 0) throw Error("no online peer to sync from");
    Bytes window = nodes_[size_t(peer)]->encode_window();
    size_t got = nodes_[size_t(idx)]->sync_from(ByteSpan(window));
    bump("sync_events");
    bump("sync_bytes_total", window.size());
    bump("sync_blocks_total", got);
    record(t, idx, "sync", window.size());
}

void Simulation::handle_leave(double t, const EvLeave& ev) {
    SimNode& n = *nodes_[size_t(ev.node)];
    n.set_online(false);
    n.drop_storage();
    for (auto& other : nodes_)
        if (other->online()) other->table().erase(n.id());
    bump("churn_leaves");
    record(t, ev.node, "leave", 0);
}

void Simulation::handle_join(double t, const EvJoin& ev) {
    SimNode& n = *nodes_[size_t(ev.node)];
    sync_node(t, ev.node);
    n.set_online(true);
    for (const auto& other : nodes_)
        if (other->online() && other->has_storage()) n.table().insert(other->id());

    if (n.config().storage_enabled) {
        auto ids = online_storer_ids();
        ids.push_back(n.id());
        std::set<StateKey> keys = authority_keys_for(n.id(), ids);
        Fetcher fetcher{*this, &n};
        if (n.rebuild_storage(std::move(keys), fetcher)) {
            bump("storage_rebuilds");
            for (auto& other : nodes_)
                if (other->online()) other->table().insert(n.id());
            record(t, ev.node, "rebuild", n.storage().stored.size());
        } else {
            bump("storage_rebuild_failures");
        }
    }
    bump("churn_joins");
    record(t, ev.node, "join", 0);
}

/* ---- run loop and checks ---- */

void Simulation::run() {
    if (ran_) throw Error("simulation already ran");
    ran_ = true;

    /* Every counter shows up in the metrics file even when it stays zero. */
    for (const char* name :
         {"blocks_total", "txs_mined", "txs_dropped_stale", "txs_dropped_invalid_witness",
          "txs_dropped_execution", "block_bytes_total", "block_bytes_max", "txs_submitted",
          "tx_bytes_total", "tx_bytes_max", "txs_unavailable", "txs_skipped_offline",
          "witness_fetches", "witness_misses", "witness_hops_total", "witness_hops_max",
          "forks_injected", "fork_degenerate_slots", "sync_events", "sync_bytes_total",
          "sync_blocks_total", "storage_rebuilds", "storage_rebuild_failures", "churn_leaves",
          "churn_joins", "slots_skipped"})
        metrics_.values[name] = 0;

    std::string echo = cfg_.echo();
    size_t pos = 0;
    while (pos < echo.size()) {
        size_t end = echo.find('\n', pos);
        trace_.push_back("cfg " + echo.substr(pos, end - pos));
        pos = end + 1;
    }

    for (uint64_t s = 1; s <= cfg_.blocks; ++s) push(double(s) * cfg_.block_time, EvMine{s});
    for (uint64_t s = 1; s <= cfg_.blocks; ++s) {
        uint64_t count = workload_.poisson(double(cfg_.tx_per_slot));
        for (uint64_t j = 0; j < count; ++j)
            push((double(s - 1) + workload_.unit()) * cfg_.block_time, EvTx{s});
    }
    for (const ChurnEvent& ev : cfg_.churn) {
        push((double(ev.leave_slot) + 0.5) * cfg_.block_time, EvLeave{ev.node});
        push((double(ev.rejoin_slot) + 0.5) * cfg_.block_time, EvJoin{ev.node});
    }

    while (!events_.empty()) {
        Event e = events_.top();
        events_.pop();
        std::visit(
            [&](const auto& p) {
                using T = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<T, EvTx>) handle_tx(e.t, p);
                else if constexpr (std::is_same_v<T, EvTxDeliver>) handle_tx_deliver(p);
                else if constexpr (std::is_same_v<T, EvMine>) handle_mine(e.t, p);
                else if constexpr (std::is_same_v<T, EvBlock>) handle_block(e.t, p);
                else if constexpr (std::is_same_v<T, EvLeave>) handle_leave(e.t, p);
                else if constexpr (std::is_same_v<T, EvJoin>) handle_join(e.t, p);
            },
            e.payload);
    }

    uint64_t reorgs = 0, depth = 0, rejected = 0, purged_mined = 0, purged_stale = 0,
             refreshes = 0;
    for (const auto& n : nodes_) {
        const node::NodeCounters& c = n->counters();
        reorgs += c.reorgs;
        depth = std::max(depth, c.reorg_depth_max);
        rejected += c.blocks_rejected;
        purged_mined += c.mempool_purged_mined;
        purged_stale += c.mempool_purged_stale;
        refreshes += c.storage_refreshes;
    }
    metrics_.values["reorgs_total"] = reorgs;
    metrics_.values["reorg_depth_max"] = depth;
    metrics_.values["blocks_rejected_total"] = rejected;
    metrics_.values["mempool_purged_mined_total"] = purged_mined;
    metrics_.values["mempool_purged_stale_total"] = purged_stale;
    metrics_.values["storage_refreshes_total"] = refreshes;

    uint64_t store_bytes = 0, store_max = 0;
    for (const auto& n : nodes_) {
        if (!n->online() || !n->has_storage()) continue;
        uint64_t sz = pads::encode(n->storage().tree).size();
        store_bytes += sz;
        store_max = std::max(store_max, sz);
    }
    metrics_.values["storage_bytes_total"] = store_bytes;
    metrics_.values["storage_bytes_max"] = store_max;

    metrics_.values["observer_reorgs"] = observer_->counters().reorgs;
    metrics_.values["head_final"] = observer_->chain().head_index();
    metrics_.values["pivot_final"] = observer_->chain().pivot_index();

    replay_checks();
}

void Simulation::replay_checks() {
    const auto& chain = observer_->chain();
    uint64_t head = chain.head_index();

    bool archive_complete = true;
    for (uint64_t h = 0; h <= head; ++h)
        if (!archive_.count(h)) archive_complete = false;
    metrics_.values["archive_complete"] = archive_complete ? 1 : 0;
    if (!archive_complete) {
        metrics_.values["conservation_ok"] = 0;
        metrics_.values["oracle_ok"] = 0;
        return;
    }

    ledger::StateMap state;
    for (const StateKey& k : pads::explicit_leaves(archive_.at(0).tau))
        state[k] = *pads::lookup_value(archive_.at(0).tau, k);

    const uint64_t expect_total = uint64_t(cfg_.accounts) * cfg_.initial_balance;
    bool conserve = true, oracle = true;
    auto conserved = [&]() {
        uint64_t sum = 0;
        for (const StateKey& k : accounts_) {
            auto it = state.find(k);
            auto bal = ledger::decode_balance(it == state.end() ? pads::StateValue() : it->second);
            if (!bal) return false;
            sum += *bal;
        }
        return sum == expect_total;
    };

    conserve = conserve && conserved();
    for (uint64_t h = 1; h <= head; ++h) {
        const Block& b = archive_.at(h);
        if (cfg_.oracle_check && pads::build_full(state, params_.tree).root() != b.tau.root())
            oracle = false;
        for (const Transaction& tx : b.txs) {
            std::map<StateKey, pads::StateValue> vals;
            for (const StateKey& k : tx.involved()) {
                auto it = state.find(k);
                vals[k] = it == state.end() ? pads::StateValue() : it->second;
            }
            auto writes =
                ledger::execute_transaction(tx, vals, scheme_, params_.tree.digest_bytes);
            if (!writes) {
                oracle = false;
                continue;
            }
            for (const auto& [k, v] : *writes) state[k] = v;
        }
        conserve = conserve && conserved();
    }
    if (cfg_.oracle_check && pads::build_full(state, params_.tree).root() != chain.pi_at(head).root())
        oracle = false;

    metrics_.values["conservation_ok"] = conserve ? 1 : 0;
    metrics_.values["oracle_ok"] = oracle ? 1 : 0;
}

std::string Simulation::trace_text() const {
    std::string body;
    for (const std::string& line : trace_) {
        body += line;
        body += '\n';
    }
    Digest d = truncated_sha256({ByteSpan(reinterpret_cast<const uint8_t*>(body.data()),
                                          body.size())},
                                params_.tree.digest_bytes);
    return body + "digest " + d.hex() + "\n";
}

}  // namespace dhtchain::simnet
