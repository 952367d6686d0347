#include <random>

#include "dhtchain/errors.hpp"
#include "dhtchain/node.hpp"
#include "doctest.h"
#include "oracle.hpp"

using namespace dhtchain;
using namespace dhtchain::node;
using ledger::Transaction;

namespace {

/* Fetcher answering from a full shadow of the state history. */
struct OracleFetcher final : WitnessFetcher {
    const ledger::TruncatedChain* chain;
    const std::vector<pads::StateMap>* pre;
    pads::TreeParams tp;
    int cost = 2;
    bool fail = false;

    OracleFetcher(const ledger::TruncatedChain* c, const std::vector<pads::StateMap>* p,
                  pads::TreeParams t)
        : chain(c), pre(p), tp(t) {}

    std::optional<ledger::ElementWitness> fetch(const StateKey& key, int& hops) override {
        hops += cost;
        if (fail) return std::nullopt;
        uint64_t pivot = chain->pivot_index();
        pads::Pads full = pads::build_full((*pre)[size_t(pivot)], tp);
        auto [value, proof] = pads::prove(full, key);
        return ledger::ElementWitness{key, value, proof, pivot};
    }
};

struct Rig {
    ledger::ChainParams cp{4, 3, 15.0, pads::TreeParams{8, 20}};
    ledger::KeyedHashScheme scheme{20};
    ledger::StateMap alloc;
    std::vector<pads::StateMap> pre;
    pads::StateMap cur;

    Rig() {
        for (int i = 1; i <= 6; ++i) alloc[BitKey::from_uint(i, 8)] = ledger::encode_balance(1000);
        pre = {alloc, alloc};
        cur = alloc;
    }

    SimNode make_node(uint64_t id) const {
        return SimNode(NodeConfig{BitKey::from_uint(id, 8), cp, 3, 16, true}, alloc, scheme);
    }

    Transaction transfer(uint64_t pivot, int from, int to, uint64_t amount) const {
        Transaction tx;
        tx.kind = ledger::TxKind::transfer;
        tx.from = BitKey::from_uint(uint64_t(from), 8);
        tx.to = BitKey::from_uint(uint64_t(to), 8);
        tx.amount = amount;
        pads::Pads full = pads::build_full(pre[size_t(pivot)], cp.tree);
        for (const StateKey& k : tx.involved()) {
            auto [value, proof] = pads::prove(full, k);
            tx.witnesses.push_back({k, value, proof, pivot});
        }
        ledger::sign_transaction(tx, scheme);
        return tx;
    }

    void track(const ledger::Block& b) {
        for (const Transaction& tx : b.txs) {
            std::map<StateKey, pads::StateValue> vals;
            for (const StateKey& k : tx.involved()) vals[k] = cur[k];
            auto ws = ledger::execute_transaction(tx, vals, scheme, 20);
            REQUIRE(ws.has_value());
            for (const auto& [k, v] : *ws) cur[k] = v;
        }
        pre.push_back(cur);
    }

    ledger::Block step(SimNode& miner, std::vector<SimNode*> others) {
        auto made = miner.mine(10);
        REQUIRE(miner.on_block(made.block).outcome == BlockOutcome::accepted);
        for (SimNode* n : others) n->on_block(made.block);
        track(made.block);
        return made.block;
    }
};

}  // namespace

TEST_CASE("create_transfer fetches sorted witnesses and signs") {
    Rig r;
    SimNode n = r.make_node(40);
    OracleFetcher f{&n.chain(), &r.pre, r.cp.tree};
    int hops = 0;
    auto tx = n.create_transfer(BitKey::from_uint(5, 8), BitKey::from_uint(2, 8), 9, f, hops);
    REQUIRE(tx.has_value());
    CHECK(hops == 4);  // two keys at cost 2
    REQUIRE(tx->witnesses.size() == 2);
    CHECK(tx->witnesses[0].key < tx->witnesses[1].key);
    CHECK(n.chain().verify_witness(tx->witnesses[0]) == ledger::WitnessStatus::valid);
    CHECK(!tx->signature.empty());

    auto made = n.chain().make_block({*tx}, 10, r.scheme);
    CHECK(made.block.txs.size() == 1);

    f.fail = true;
    CHECK(!n.create_transfer(BitKey::from_uint(1, 8), BitKey::from_uint(2, 8), 1, f, hops)
               .has_value());
}

TEST_CASE("create_generic covers reads and writes") {
    Rig r;
    SimNode n = r.make_node(40);
    OracleFetcher f{&n.chain(), &r.pre, r.cp.tree};
    int hops = 0;
    auto tx = n.create_generic({BitKey::from_uint(1, 8)}, {BitKey::from_uint(9, 8)}, 7, f, hops);
    REQUIRE(tx.has_value());
    CHECK(tx->witnesses.size() == 2);
    auto made = n.chain().make_block({*tx}, 10, r.scheme);
    CHECK(made.block.txs.size() == 1);
}

TEST_CASE("accept_tx dedupes by transaction id") {
    Rig r;
    SimNode n = r.make_node(40);
    Transaction a = r.transfer(0, 1, 2, 5);
    Transaction same = r.transfer(0, 1, 2, 5);
    Transaction other = r.transfer(0, 1, 2, 6);
    CHECK(n.accept_tx(a));
    CHECK(!n.accept_tx(same));
    CHECK(n.accept_tx(other));
    CHECK(n.mempool().size() == 2);
}

TEST_CASE("mine is read-only and drop_mined clears what it consumed") {
    Rig r;
    SimNode n = r.make_node(40);
    n.accept_tx(r.transfer(0, 1, 2, 5));
    n.accept_tx(r.transfer(0, 3, 4, 5000));  // overdraft
    n.accept_tx(r.transfer(0, 5, 6, 1));

    auto made = n.mine(10);
    auto again = n.mine(10);
    CHECK(made.block.header == again.block.header);
    CHECK(n.mempool().size() == 3);

    CHECK(made.block.txs.size() == 2);
    CHECK(made.invalid_execution_drops == 1);
    n.drop_mined(made);
    CHECK(n.mempool().empty());
}

TEST_CASE("on_block outcome ladder") {
    Rig r;
    SimNode n = r.make_node(40);
    ledger::Block b1 = r.step(n, {});
    CHECK(n.on_block(b1).outcome == BlockOutcome::duplicate);

    // far-future block asks for a sync
    pads::Pads junk(pads::Node::stub(Digest::zero(20), r.cp.tree.width, 20), r.cp.tree);
    ledger::Block far(n.chain().head_index() + uint64_t(r.cp.window_blocks()) + 1,
                      Digest::zero(20), {}, junk);
    CHECK(n.on_block(far).outcome == BlockOutcome::need_sync);

    // tampered successor is rejected with a verdict
    n.accept_tx(r.transfer(n.chain().pivot_index(), 1, 2, 5));
    auto made = n.mine(10);
    REQUIRE(made.block.txs.size() == 1);
    std::vector<Transaction> txs = made.block.txs;
    txs[0].amount += 1;
    ledger::Block bad(made.block.index, made.block.parent, txs, made.block.tau);
    auto rep = n.on_block(bad);
    CHECK(rep.outcome == BlockOutcome::rejected);
    CHECK(rep.verdict == ledger::Verdict::bad_tx_execution);
    CHECK(n.counters().blocks_rejected == 1);

    // the untampered one still lands
    CHECK(n.on_block(made.block).outcome == BlockOutcome::accepted);
    r.track(made.block);

    // outrun the window, then replay an expired block
    ledger::Block old = n.chain().block_at(1);
    while (n.chain().window_start() <= 1) r.step(n, {});
    CHECK(n.on_block(old).outcome == BlockOutcome::stale_height);
}

TEST_CASE("a longer branch reorgs the node and never rolls the pivot back") {
    Rig r;
    SimNode a = r.make_node(40), b = r.make_node(41);
    for (int i = 0; i < 8; ++i) r.step(a, {&b});
    REQUIRE(a.chain().head_digest() == b.chain().head_digest());
    uint64_t pivot_before = a.chain().pivot_index();
    CHECK(pivot_before == 5);

    // a mines a tx block; b extends an empty branch two blocks
    Transaction t1 = r.transfer(a.chain().pivot_index(), 1, 2, 5);
    a.accept_tx(t1);
    auto xa = a.mine(10);
    REQUIRE(xa.block.txs.size() == 1);
    a.on_block(xa.block);

    auto y1 = b.mine(10);
    b.on_block(y1.block);
    auto y2 = b.mine(10);
    b.on_block(y2.block);
    REQUIRE(y1.block.header != xa.block.header);

    auto r1 = a.on_block(y1.block);
    CHECK((r1.outcome == BlockOutcome::branch_stored || r1.outcome == BlockOutcome::reorged));
    a.on_block(y2.block);

    CHECK(a.chain().head_digest() == b.chain().head_digest());
    CHECK(a.chain().head_index() == 10);
    CHECK(a.counters().reorgs == 1);
    CHECK(a.counters().reorg_depth_max == 1);
    CHECK(a.chain().pivot_index() >= pivot_before);

    // the orphaned transfer stays consumed: purged when mined, remembered as seen
    CHECK(a.mempool().empty());
    CHECK(!a.accept_tx(t1));
}

TEST_CASE("mempool purges mined and stale transactions") {
    Rig r;
    SimNode a = r.make_node(40), b = r.make_node(41);
    Transaction t1 = r.transfer(0, 1, 2, 5);
    a.accept_tx(t1);
    b.accept_tx(t1);
    r.step(a, {&b});
    CHECK(b.mempool().empty());
    CHECK(b.counters().mempool_purged_mined == 1);

    // park a tx whose witnesses pin the current oldest retained height
    Transaction t2 = r.transfer(b.chain().window_start(), 3, 4, 1);
    b.accept_tx(t2);
    while (b.chain().window_start() <= t2.witnesses[0].pivot_index) r.step(a, {&b});
    CHECK(b.mempool().empty());
    CHECK(b.counters().mempool_purged_stale == 1);
}

TEST_CASE("window sync clones the chain and wipes local roles") {
    Rig r;
    SimNode a = r.make_node(40);
    for (int i = 0; i < 12; ++i) r.step(a, {});
    a.accept_tx(r.transfer(a.chain().pivot_index(), 1, 2, 3));

    SimNode c = r.make_node(42);
    c.init_storage({BitKey::from_uint(1, 8)});
    c.accept_tx(r.transfer(0, 5, 6, 1));
    size_t got = c.sync_from(ByteSpan(a.encode_window()));
    CHECK(got == a.chain().window_size());
    CHECK(c.chain().head_digest() == a.chain().head_digest());
    CHECK(c.chain().window_start() == a.chain().window_start());
    CHECK(c.mempool().empty());
    CHECK(!c.has_storage());

    // both judge the same successor identically
    auto made = a.mine(10);
    CHECK(c.on_block(made.block).outcome == BlockOutcome::accepted);

    Bytes garbage{0x05, 0x01, 0x02};
    CHECK_THROWS_AS(c.sync_from(ByteSpan(garbage)), Error);
}

TEST_CASE("storage rides along as the pivot advances") {
    Rig r;
    SimNode n = r.make_node(40);
    BitKey k1 = BitKey::from_uint(1, 8);
    n.init_storage({k1});
    CHECK(n.has_storage());
    CHECK(n.storage().pivot_index == 0);

    Transaction t1 = r.transfer(0, 1, 2, 250);
    n.accept_tx(t1);
    r.step(n, {});  // height 1 carries the transfer
    for (int i = 0; i < 12; ++i) r.step(n, {});

    CHECK(n.storage().pivot_index == n.chain().pivot_index());
    CHECK(n.counters().storage_refreshes == n.chain().pivot_index());
    auto w = n.storage().witness_for(k1);
    CHECK(w.value == ledger::encode_balance(750));
    CHECK(n.chain().verify_witness(w) == ledger::WitnessStatus::valid);
}

TEST_CASE("storage rebuild after a sync serves fresh witnesses") {
    Rig r;
    SimNode a = r.make_node(40);
    Transaction t1 = r.transfer(0, 1, 2, 100);
    a.accept_tx(t1);
    for (int i = 0; i < 15; ++i) r.step(a, {});

    SimNode c = r.make_node(42);
    c.sync_from(ByteSpan(a.encode_window()));
    OracleFetcher f{&c.chain(), &r.pre, r.cp.tree};
    std::set<StateKey> keys{BitKey::from_uint(1, 8), BitKey::from_uint(2, 8)};

    f.fail = true;
    CHECK(!c.rebuild_storage(keys, f));
    CHECK(!c.has_storage());

    f.fail = false;
    CHECK(c.rebuild_storage(keys, f));
    REQUIRE(c.has_storage());
    CHECK(c.storage().pivot_index == c.chain().pivot_index());
    auto w = c.storage().witness_for(BitKey::from_uint(1, 8));
    CHECK(w.value == ledger::encode_balance(900));
    CHECK(a.chain().verify_witness(w) == ledger::WitnessStatus::valid);
}
