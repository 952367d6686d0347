#include "dhtchain/node.hpp"

#include <algorithm>
#include <array>

#include "dhtchain/errors.hpp"

namespace dhtchain::node {

using ledger::Verdict;

SimNode::SimNode(NodeConfig cfg, const ledger::StateMap& allocation,
                 const ledger::SignatureScheme& scheme)
    : cfg_(std::move(cfg)),
      scheme_(&scheme),
      chain_(ledger::TruncatedChain::genesis(cfg_.chain, allocation)),
      table_(cfg_.id, cfg_.bucket_capacity) {}

std::optional<Transaction> SimNode::attach_witnesses(Transaction tx, WitnessFetcher& fetch,
                                                     int& hops) {
    for (const StateKey& k : tx.involved()) {
        auto w = fetch.fetch(k, hops);
        if (!w) return std::nullopt;
        tx.witnesses.push_back(std::move(*w));
    }
    std::sort(tx.witnesses.begin(), tx.witnesses.end(),
              [](const ledger::ElementWitness& a, const ledger::ElementWitness& b) {
                  return a.key < b.key;
              });
    ledger::sign_transaction(tx, *scheme_);
    return tx;
}

std::optional<Transaction> SimNode::create_transfer(const StateKey& from, const StateKey& to,
                                                    uint64_t amount, WitnessFetcher& fetch,
                                                    int& hops) {
    Transaction tx;
    tx.kind = ledger::TxKind::transfer;
    tx.from = from;
    tx.to = to;
    tx.amount = amount;
    return attach_witnesses(std::move(tx), fetch, hops);
}

std::optional<Transaction> SimNode::create_generic(std::vector<StateKey> reads,
                                                   std::vector<StateKey> writes, uint64_t salt,
                                                   WitnessFetcher& fetch, int& hops) {
    Transaction tx;
    tx.kind = ledger::TxKind::generic;
    tx.reads = std::move(reads);
    tx.writes = std::move(writes);
    tx.salt = salt;
    return attach_witnesses(std::move(tx), fetch, hops);
}

bool SimNode::accept_tx(Transaction tx) {
    Digest id = ledger::tx_id(tx, cfg_.chain.tree.digest_bytes);
    if (!seen_txs_.insert(id).second) return false;
    mempool_.push_back(std::move(tx));
    return true;
}

ledger::MakeBlockResult SimNode::mine(int max_txs) const {
    return chain_.make_block(mempool_, max_txs, *scheme_);
}

void SimNode::drop_mined(const ledger::MakeBlockResult& made) {
    const size_t dlen = cfg_.chain.tree.digest_bytes;
    std::set<Digest> gone(made.dropped_tx_ids.begin(), made.dropped_tx_ids.end());
    for (const Transaction& tx : made.block.txs) gone.insert(ledger::tx_id(tx, dlen));
    std::erase_if(mempool_,
                  [&](const Transaction& tx) { return gone.count(ledger::tx_id(tx, dlen)) > 0; });
}

void SimNode::apply_append(const Block& b) {
    ledger::AppendResult res = chain_.append_block(b, *scheme_);
    ++counters_.blocks_accepted;
    if (storage_ && res.pivot_tau_bar &&
        dht::advance_storage(*storage_, *res.pivot_tau_bar, res.pivot))
        ++counters_.storage_refreshes;
    purge_mempool_for(b);
}

void SimNode::purge_mempool_for(const Block& b) {
    const size_t dlen = cfg_.chain.tree.digest_bytes;
    std::set<Digest> mined;
    for (const Transaction& tx : b.txs) mined.insert(ledger::tx_id(tx, dlen));
    uint64_t ws = chain_.window_start();
    std::erase_if(mempool_, [&](const Transaction& tx) {
        if (mined.count(ledger::tx_id(tx, dlen))) {
            ++counters_.mempool_purged_mined;
            return true;
        }
        for (const ledger::ElementWitness& w : tx.witnesses) {
            if (w.pivot_index < ws) {
                ++counters_.mempool_purged_stale;
                return true;
            }
        }
        return false;
    });
}

int SimNode::drain_side_blocks() {
    int appended = 0;
    for (;;) {
        auto it = std::find_if(side_blocks_.begin(), side_blocks_.end(), [&](const auto& kv) {
            return kv.second.index == chain_.head_index() + 1 &&
                   kv.second.parent == chain_.head_digest();
        });
        if (it == side_blocks_.end()) break;
        Block b = it->second;
        side_blocks_.erase(it);
        if (chain_.validate_block(b, *scheme_) != Verdict::ok) {
            ++counters_.blocks_rejected;
            continue;
        }
        apply_append(b);
        ++appended;
    }
    return appended;
}

BlockReport SimNode::try_branch(const Block& tip) {
    std::vector<const Block*> branch{&tip};
    const Block* cur = &tip;
    uint64_t fork_point = 0;
    for (;;) {
        if (cur->index == 0) return {BlockOutcome::branch_stored, 0, std::nullopt};
        uint64_t pidx = cur->index - 1;
        if (chain_.in_window(pidx) && chain_.block_at(pidx).header == cur->parent) {
            fork_point = pidx;
            break;
        }
        auto it = side_blocks_.find(cur->parent);
        if (it == side_blocks_.end() || it->second.index != pidx)
            return {BlockOutcome::branch_stored, 0, std::nullopt};
        cur = &it->second;
        branch.push_back(cur);
    }
    std::reverse(branch.begin(), branch.end());

    std::array<ledger::ChainView, 2> views{
        ledger::ChainView{chain_.head_index(), chain_.head_digest(),
                          chain_.head_index() - fork_point},
        ledger::ChainView{tip.index, tip.header, tip.index - fork_point},
    };
    if (ledger::fork_choice(views, cfg_.chain.f) == 0)
        return {BlockOutcome::branch_stored, 0, std::nullopt};

    // keep the displaced blocks around so a later reorg can walk back
    for (uint64_t h = fork_point + 1; h <= chain_.head_index(); ++h) {
        const Block& old = chain_.block_at(h);
        side_blocks_.emplace(old.header, old);
    }

    ledger::TruncatedChain rebuilt = chain_.rewound_to(fork_point);
    std::vector<ledger::AppendResult> advances;
    advances.reserve(branch.size());
    for (const Block* b : branch) {
        Verdict v = rebuilt.validate_block(*b, *scheme_);
        if (v != Verdict::ok) {
            ++counters_.blocks_rejected;
            return {BlockOutcome::rejected, 0, v};
        }
        advances.push_back(rebuilt.append_block(*b, *scheme_));
    }

    uint64_t depth = chain_.head_index() - fork_point;
    chain_ = std::move(rebuilt);
    ++counters_.reorgs;
    counters_.reorg_depth_max = std::max(counters_.reorg_depth_max, depth);
    counters_.blocks_accepted += branch.size();
    for (const ledger::AppendResult& a : advances) {
        if (storage_ && a.pivot_tau_bar && dht::advance_storage(*storage_, *a.pivot_tau_bar, a.pivot))
            ++counters_.storage_refreshes;
    }
    for (const Block* b : branch) purge_mempool_for(*b);
    for (const Block* b : branch) side_blocks_.erase(b->header);
    int appended = int(branch.size()) + drain_side_blocks();
    return {BlockOutcome::reorged, appended, std::nullopt};
}

BlockReport SimNode::on_block(const Block& b) {
    std::erase_if(side_blocks_,
                  [&](const auto& kv) { return kv.second.index < chain_.window_start(); });

    if (chain_.in_window(b.index) && chain_.block_at(b.index).header == b.header)
        return {BlockOutcome::duplicate, 0, std::nullopt};
    if (b.index < chain_.window_start()) return {BlockOutcome::stale_height, 0, std::nullopt};
    if (b.index > chain_.head_index() + uint64_t(cfg_.chain.window_blocks()))
        return {BlockOutcome::need_sync, 0, std::nullopt};

    if (b.index == chain_.head_index() + 1 && b.parent == chain_.head_digest()) {
        Verdict v = chain_.validate_block(b, *scheme_);
        if (v != Verdict::ok) {
            ++counters_.blocks_rejected;
            return {BlockOutcome::rejected, 0, v};
        }
        apply_append(b);
        return {BlockOutcome::accepted, 1 + drain_side_blocks(), std::nullopt};
    }

    if (side_blocks_.count(b.header)) return {BlockOutcome::duplicate, 0, std::nullopt};
    side_blocks_.emplace(b.header, b);
    return try_branch(b);
}

Bytes SimNode::encode_window() const {
    ByteWriter w;
    w.varint(chain_.window_size());
    for (uint64_t i = chain_.window_start(); i <= chain_.head_index(); ++i)
        w.blob(ByteSpan(ledger::encode_block(chain_.block_at(i))));
    return w.take();
}

size_t SimNode::sync_from(ByteSpan window_bytes) {
    ByteReader r(window_bytes);
    uint64_t n = r.varint();
    if (n == 0 || n > 4096) throw SyncError("implausible window size");
    std::vector<Block> blocks;
    blocks.reserve(size_t(n));
    for (uint64_t i = 0; i < n; ++i) {
        Bytes one = r.blob(64 << 20);
        blocks.push_back(ledger::decode_block(ByteSpan(one), cfg_.chain.tree));
    }
    r.expect_done();
    chain_ = ledger::TruncatedChain::from_window(cfg_.chain, blocks, *scheme_);
    mempool_.clear();
    side_blocks_.clear();
    storage_.reset();
    return size_t(n);
}

void SimNode::init_storage(std::set<StateKey> keys) {
    uint64_t pivot = chain_.pivot_index();
    storage_ = dht::make_storage(chain_.tau_at(pivot), pivot, std::move(keys));
}

bool SimNode::rebuild_storage(std::set<StateKey> keys, WitnessFetcher& fetch) {
    std::vector<ledger::ElementWitness> wits;
    wits.reserve(keys.size());
    int hops = 0;
    for (const StateKey& k : keys) {
        auto w = fetch.fetch(k, hops);
        if (!w) return false;
        wits.push_back(std::move(*w));
    }
    std::vector<const ledger::ElementWitness*> ptrs;
    ptrs.reserve(wits.size());
    for (const ledger::ElementWitness& w : wits) ptrs.push_back(&w);

    uint64_t pivot = chain_.pivot_index();
    pads::Pads tree = ledger::backward_fill(chain_, pivot, ptrs,
                                            std::vector<StateKey>(keys.begin(), keys.end()));
    if (tree.root() != chain_.tau_at(pivot).root())
        throw SyncError("rebuilt storage does not match the pivot root");
    storage_ = dht::StorageState{std::move(tree), pivot, std::move(keys)};
    return true;
}

}  // namespace dhtchain::node
