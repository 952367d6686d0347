#include <deque>
#include <random>

#include "dhtchain/errors.hpp"
#include "dhtchain/ledger.hpp"
#include "doctest.h"
#include "oracle.hpp"

using namespace dhtchain;
using namespace dhtchain::ledger;

namespace {

/* Chain driver that shadows the full (untruncated) state history, so tests
   can mint witnesses of any age and check roots against the oracle. */
struct ChainSim {
    ChainParams cp;
    KeyedHashScheme scheme{20};
    TruncatedChain chain;
    std::vector<StateMap> pre_state;  // pre_state[h] = state before block h
    StateMap cur;

    ChainSim(int d, int f, int width, StateMap alloc)
        : cp{d, f, 15.0, pads::TreeParams{width, 20}},
          chain(TruncatedChain::genesis(cp, alloc)),
          cur(alloc) {
        pre_state.push_back(alloc);  // genesis carries the allocation
        pre_state.push_back(alloc);  // pre-state of block 1
    }

    ElementWitness witness(const StateKey& k, uint64_t pivot) const {
        Pads full = pads::build_full(pre_state[size_t(pivot)], cp.tree);
        auto [value, proof] = pads::prove(full, k);
        return ElementWitness{k, value, proof, pivot};
    }

    Transaction transfer(const StateKey& from, const StateKey& to, uint64_t amount,
                         uint64_t pivot) const {
        Transaction tx;
        tx.kind = TxKind::transfer;
        tx.from = from;
        tx.to = to;
        tx.amount = amount;
        tx.witnesses = {witness(std::min(from, to), pivot), witness(std::max(from, to), pivot)};
        sign_transaction(tx, scheme);
        return tx;
    }

    Block advance(const std::deque<Transaction>& pool) {
        auto made = chain.make_block(pool, 100, scheme);
        chain.append_block(made.block, scheme);
        for (const Transaction& tx : made.block.txs) {
            std::map<StateKey, StateValue> vals;
            for (const StateKey& k : tx.involved()) vals[k] = cur.count(k) ? cur[k] : StateValue();
            auto ws = execute_transaction(tx, vals, scheme, 20);
            REQUIRE(ws.has_value());
            for (const auto& [k, v] : *ws) cur[k] = v;
        }
        pre_state.push_back(cur);
        return made.block;
    }

    Block advance_empty() { return advance({}); }
};

StateMap two_accounts(int width, uint64_t balance) {
    StateMap alloc;
    alloc[BitKey::from_uint(1, width)] = encode_balance(balance);
    alloc[BitKey::from_uint(2, width)] = encode_balance(balance);
    return alloc;
}

}  // namespace

TEST_CASE("genesis exposes the allocation as both tau and pi") {
    ChainSim s(4, 3, 8, two_accounts(8, 500));
    CHECK(s.chain.head_index() == 0);
    CHECK(s.chain.window_start() == 0);
    CHECK(s.chain.pivot_index() == 0);
    Digest want = oracle::root(s.pre_state[0], 8, 20);
    CHECK(s.chain.tau_at(0).root() == want);
    CHECK(s.chain.pi_at(0).root() == want);
}

TEST_CASE("window slides and older blocks become unreachable") {
    ChainSim s(4, 3, 8, two_accounts(8, 500));
    for (int i = 0; i < 30; ++i) s.advance_empty();
    CHECK(s.chain.head_index() == 30);
    CHECK(s.chain.window_size() == 7);  // d + f
    CHECK(s.chain.window_start() == 24);
    CHECK(s.chain.pivot_index() == 27);
    CHECK(s.chain.in_window(24));
    CHECK(!s.chain.in_window(23));
    CHECK_THROWS_AS(s.chain.block_at(23), Error);
}

TEST_CASE("consecutive post and pre state roots agree") {
    ChainSim s(3, 2, 8, two_accounts(8, 1000));
    std::mt19937_64 rng(4);
    for (int i = 0; i < 12; ++i) {
        std::deque<Transaction> pool;
        if (rng() % 2)
            pool.push_back(s.transfer(BitKey::from_uint(1, 8), BitKey::from_uint(2, 8),
                                      1 + rng() % 10, s.chain.pivot_index()));
        s.advance(pool);
    }
    for (uint64_t x = s.chain.window_start(); x < s.chain.head_index(); ++x)
        CHECK(s.chain.pi_at(x).root() == s.chain.tau_at(x + 1).root());
}

TEST_CASE("witness verdicts by pivot age") {
    ChainSim s(4, 3, 8, two_accounts(8, 500));
    for (int i = 0; i < 20; ++i) s.advance_empty();
    BitKey key = BitKey::from_uint(1, 8);

    for (uint64_t p = s.chain.window_start(); p <= s.chain.head_index(); ++p)
        CHECK(s.chain.verify_witness(s.witness(key, p)) == WitnessStatus::valid);

    CHECK(s.chain.verify_witness(s.witness(key, s.chain.window_start() - 1)) ==
          WitnessStatus::stale);

    ElementWitness future = s.witness(key, s.chain.head_index());
    future.pivot_index = s.chain.head_index() + 1;
    CHECK(s.chain.verify_witness(future) == WitnessStatus::invalid);

    ElementWitness forged = s.witness(key, s.chain.pivot_index());
    forged.value = encode_balance(999999);
    CHECK(s.chain.verify_witness(forged) == WitnessStatus::invalid);
}

TEST_CASE("make_block mines valid transfers and strips witnesses") {
    ChainSim s(4, 3, 8, two_accounts(8, 500));
    BitKey a = BitKey::from_uint(1, 8), b = BitKey::from_uint(2, 8);
    std::deque<Transaction> pool{s.transfer(a, b, 40, 0)};
    auto made = s.chain.make_block(pool, 10, s.scheme);
    REQUIRE(made.block.txs.size() == 1);
    CHECK(made.block.txs[0].witnesses.empty());
    CHECK(made.dropped_tx_ids.empty());

    // the carried tau holds exactly the involved elements
    auto leaves = pads::explicit_leaves(made.block.tau);
    CHECK(leaves.size() == 2);
    CHECK(*pads::lookup_value(made.block.tau, a) == encode_balance(500));

    s.chain.append_block(made.block, s.scheme);
    CHECK(*pads::lookup_value(s.chain.pi_at(1), a) == encode_balance(460));
    CHECK(*pads::lookup_value(s.chain.pi_at(1), b) == encode_balance(540));
}

TEST_CASE("make_block sorts transactions into drop buckets") {
    ChainSim s(4, 3, 8, two_accounts(8, 500));
    for (int i = 0; i < 12; ++i) s.advance_empty();
    BitKey a = BitKey::from_uint(1, 8), b = BitKey::from_uint(2, 8);

    Transaction stale = s.transfer(a, b, 1, s.chain.window_start() - 1);

    Transaction forged = s.transfer(a, b, 1, s.chain.pivot_index());
    forged.witnesses[0].value = encode_balance(12345);

    Transaction overdraft = s.transfer(a, b, 501, s.chain.pivot_index());

    Transaction good = s.transfer(a, b, 7, s.chain.pivot_index());

    auto made = s.chain.make_block({stale, forged, overdraft, good}, 10, s.scheme);
    CHECK(made.stale_witness_drops == 1);
    CHECK(made.invalid_witness_drops == 1);
    CHECK(made.invalid_execution_drops == 1);
    REQUIRE(made.block.txs.size() == 1);
    CHECK(tx_id(made.block.txs[0], 20) == tx_id(good, 20));
    CHECK(made.dropped_tx_ids.size() == 3);
}

TEST_CASE("a transaction missing a witness for an involved key is dropped") {
    ChainSim s(4, 3, 8, two_accounts(8, 500));
    Transaction tx = s.transfer(BitKey::from_uint(1, 8), BitKey::from_uint(2, 8), 1, 0);
    tx.witnesses.pop_back();
    sign_transaction(tx, s.scheme);
    auto made = s.chain.make_block({tx}, 10, s.scheme);
    CHECK(made.block.txs.empty());
    CHECK(made.invalid_witness_drops == 1);
}

TEST_CASE("build_tau reconstructs the oracle pre-state from mixed-age witnesses") {
    ChainSim s(4, 4, 8, two_accounts(8, 1000));
    BitKey a = BitKey::from_uint(1, 8), b = BitKey::from_uint(2, 8);
    std::mt19937_64 rng(77);
    for (int i = 0; i < 14; ++i)
        s.advance({s.transfer(a, b, 1 + rng() % 5, s.chain.pivot_index())});

    // ages 0..d-1 relative to the live pivot, all verifiable
    for (uint64_t age = 0; age < 4; ++age) {
        uint64_t pivot = s.chain.pivot_index() - age;
        std::deque<Transaction> pool{s.transfer(a, b, 2, pivot)};
        auto made = s.chain.make_block(pool, 10, s.scheme);
        REQUIRE(made.block.txs.size() == 1);

        Pads want = pads::prune(pads::build_full(s.cur, s.cp.tree), {a, b});
        CHECK(pads::structurally_equal(made.block.tau, want));
        CHECK(made.block.tau.root() == s.chain.pi_at(s.chain.head_index()).root());
    }
}

TEST_CASE("backward_fill demands a source for every key") {
    ChainSim s(4, 3, 8, two_accounts(8, 500));
    // empty blocks carry stub-only trees, so once the full genesis tree leaves
    // the window nothing can source an untouched key
    for (int i = 0; i < 10; ++i) s.advance_empty();
    BitKey unheard = BitKey::from_uint(9, 8);
    CHECK_THROWS_AS(
        backward_fill(s.chain, s.chain.head_index() + 1, {}, {unheard}), Unfillable);
}

TEST_CASE("validate_block separates the failure modes") {
    StateMap alloc = two_accounts(8, 500);
    BitKey bystander = BitKey::from_uint(9, 8);
    alloc[bystander] = encode_balance(100);
    ChainSim s(4, 3, 8, alloc);
    BitKey a = BitKey::from_uint(1, 8), b = BitKey::from_uint(2, 8);
    for (int i = 0; i < 4; ++i) s.advance({s.transfer(a, b, 3, s.chain.pivot_index())});

    auto made = s.chain.make_block({s.transfer(a, b, 5, s.chain.pivot_index())}, 10, s.scheme);
    const Block& good = made.block;
    CHECK(s.chain.validate_block(good, s.scheme) == Verdict::ok);

    Block bad_index(good.index + 3, good.parent, good.txs, good.tau);
    CHECK(s.chain.validate_block(bad_index, s.scheme) == Verdict::bad_chain);

    Block bad_parent(good.index, Digest::zero(20), good.txs, good.tau);
    CHECK(s.chain.validate_block(bad_parent, s.scheme) == Verdict::bad_chain);

    Pads wrong_tau = pads::prune(pads::build_full(s.pre_state[2], s.cp.tree), {a, b});
    Block bad_root(good.index, good.parent, good.txs, wrong_tau);
    CHECK(s.chain.validate_block(bad_root, s.scheme) == Verdict::bad_tau_root);

    // right root, but carrying more of the tree than the block's txs touch
    Pads fat_tau = pads::prune(pads::build_full(s.cur, s.cp.tree), {a, b, bystander});
    Block bad_shape(good.index, good.parent, good.txs, fat_tau);
    CHECK(s.chain.validate_block(bad_shape, s.scheme) == Verdict::bad_tau_shape);

    std::vector<Transaction> tampered = good.txs;
    tampered[0].amount += 1;
    Block bad_exec(good.index, good.parent, tampered, good.tau);
    CHECK(s.chain.validate_block(bad_exec, s.scheme) == Verdict::bad_tx_execution);

    std::vector<Transaction> unsigned_txs = good.txs;
    unsigned_txs[0].signature.clear();
    Block bad_sig(good.index, good.parent, unsigned_txs, good.tau);
    CHECK(s.chain.validate_block(bad_sig, s.scheme) == Verdict::bad_tx_execution);
}

TEST_CASE("append reports the pivot step with its post-state tree") {
    ChainSim s(4, 3, 8, two_accounts(8, 500));
    for (int i = 0; i < 2; ++i) {
        auto made = s.chain.make_block({}, 10, s.scheme);
        auto res = s.chain.append_block(made.block, s.scheme);
        CHECK(res.pivot == 0);
        CHECK(!res.pivot_tau_bar.has_value());
        s.pre_state.push_back(s.cur);
    }
    // block 4 moves the pivot from 0 to 1 (f = 3)
    s.advance_empty();
    auto made = s.chain.make_block({}, 10, s.scheme);
    auto res = s.chain.append_block(made.block, s.scheme);
    CHECK(res.head == 4);
    CHECK(res.pivot == 1);
    REQUIRE(res.pivot_tau_bar.has_value());
    CHECK(res.pivot_tau_bar->root() == s.chain.tau_at(1).root());
}

TEST_CASE("a window rebuilds into an equivalent chain") {
    ChainSim s(4, 3, 8, two_accounts(8, 1000));
    BitKey a = BitKey::from_uint(1, 8), b = BitKey::from_uint(2, 8);
    std::mt19937_64 rng(9);
    for (int i = 0; i < 25; ++i)
        s.advance({s.transfer(a, b, 1 + rng() % 4, s.chain.pivot_index())});

    std::vector<Block> window;
    for (uint64_t h = s.chain.window_start(); h <= s.chain.head_index(); ++h)
        window.push_back(s.chain.block_at(h));
    auto rebuilt = TruncatedChain::from_window(s.cp, window, s.scheme);

    CHECK(rebuilt.head_index() == s.chain.head_index());
    CHECK(rebuilt.head_digest() == s.chain.head_digest());
    CHECK(rebuilt.window_start() == s.chain.window_start());
    for (uint64_t h = rebuilt.window_start(); h <= rebuilt.head_index(); ++h) {
        CHECK(rebuilt.block_at(h).header == s.chain.block_at(h).header);
        CHECK(rebuilt.pi_at(h).root() == s.chain.pi_at(h).root());
    }

    // both accept the same next block
    auto made = s.chain.make_block({s.transfer(a, b, 2, s.chain.pivot_index())}, 10, s.scheme);
    CHECK(rebuilt.validate_block(made.block, s.scheme) == Verdict::ok);
}

TEST_CASE("a window that still contains genesis rebuilds too") {
    ChainSim s(4, 3, 8, two_accounts(8, 500));
    for (int i = 0; i < 3; ++i) s.advance_empty();
    std::vector<Block> window;
    for (uint64_t h = 0; h <= s.chain.head_index(); ++h) window.push_back(s.chain.block_at(h));
    auto rebuilt = TruncatedChain::from_window(s.cp, window, s.scheme);
    CHECK(rebuilt.head_digest() == s.chain.head_digest());
    CHECK(rebuilt.window_start() == 0);
}

TEST_CASE("a tampered window is rejected wholesale") {
    ChainSim s(4, 3, 8, two_accounts(8, 1000));
    BitKey a = BitKey::from_uint(1, 8), b = BitKey::from_uint(2, 8);
    for (int i = 0; i < 10; ++i) s.advance({s.transfer(a, b, 2, s.chain.pivot_index())});

    std::vector<Block> window;
    for (uint64_t h = s.chain.window_start(); h <= s.chain.head_index(); ++h)
        window.push_back(s.chain.block_at(h));
    Block& victim = window[window.size() / 2];
    std::vector<Transaction> txs = victim.txs;
    REQUIRE(!txs.empty());
    txs[0].amount += 1;
    victim = Block(victim.index, victim.parent, txs, victim.tau);
    CHECK_THROWS_AS(TruncatedChain::from_window(s.cp, window, s.scheme), SyncError);
}

TEST_CASE("rewind stops at the window edge") {
    ChainSim s(4, 3, 8, two_accounts(8, 500));
    for (int i = 0; i < 12; ++i) s.advance_empty();
    auto back = s.chain.rewound_to(10);
    CHECK(back.head_index() == 10);
    CHECK(back.head_digest() == s.chain.block_at(10).header);
    CHECK_THROWS_AS(s.chain.rewound_to(s.chain.window_start() - 1), Error);
}

TEST_CASE("fork choice prefers length, then the smaller head digest") {
    std::vector<ChainView> views;
    views.push_back({10, Digest::zero(20), 2});
    Digest other = Digest::zero(20);
    views.push_back({11, other, 3});
    CHECK(fork_choice(views, 5) == 1);

    Bytes lo(20, 0x01), hi(20, 0x02);
    std::vector<ChainView> tie{{11, Digest(ByteSpan(hi)), 2}, {11, Digest(ByteSpan(lo)), 2}};
    CHECK(fork_choice(tie, 5) == 1);

    std::vector<ChainView> deep{{12, Digest::zero(20), 6}};
    CHECK_THROWS_AS(fork_choice(deep, 5), BranchTooLong);
}

TEST_CASE("transfer execution moves balances and rejects overdrafts") {
    KeyedHashScheme scheme(20);
    BitKey a = BitKey::from_uint(1, 8), b = BitKey::from_uint(2, 8);
    Transaction tx;
    tx.kind = TxKind::transfer;
    tx.from = a;
    tx.to = b;
    tx.amount = 30;
    sign_transaction(tx, scheme);

    std::map<StateKey, StateValue> vals{{a, encode_balance(100)}, {b, StateValue()}};
    auto ws = execute_transaction(tx, vals, scheme, 20);
    REQUIRE(ws.has_value());
    CHECK(decode_balance(ws->at(a)) == 70);
    CHECK(decode_balance(ws->at(b)) == 30);

    vals[a] = encode_balance(29);
    CHECK(!execute_transaction(tx, vals, scheme, 20).has_value());

    Transaction forged = tx;
    forged.amount = 5;
    vals[a] = encode_balance(100);
    CHECK(!execute_transaction(forged, vals, scheme, 20).has_value());
}

TEST_CASE("generic execution writes a deterministic update and leaves reads alone") {
    KeyedHashScheme scheme(20);
    BitKey r = BitKey::from_uint(3, 8), w = BitKey::from_uint(4, 8);
    Transaction tx;
    tx.kind = TxKind::generic;
    tx.reads = {r};
    tx.writes = {w};
    tx.salt = 11;
    sign_transaction(tx, scheme);

    std::map<StateKey, StateValue> vals{{r, pads::StateValue::of("input")}, {w, StateValue()}};
    auto ws = execute_transaction(tx, vals, scheme, 20);
    REQUIRE(ws.has_value());
    CHECK(ws->count(r) == 0);
    CHECK(ws->count(w) == 1);
    CHECK(!ws->at(w).is_null());
    auto again = execute_transaction(tx, vals, scheme, 20);
    CHECK(again->at(w) == ws->at(w));
}

TEST_CASE("balances conserve across a busy stretch") {
    StateMap alloc;
    for (int i = 1; i <= 6; ++i) alloc[BitKey::from_uint(i, 8)] = encode_balance(1000);
    ChainSim s(4, 3, 8, alloc);
    std::mt19937_64 rng(15);
    for (int i = 0; i < 20; ++i) {
        std::deque<Transaction> pool;
        for (int j = 0; j < 3; ++j) {
            int a = 1 + int(rng() % 6), b = 1 + int(rng() % 6);
            if (a == b) continue;
            pool.push_back(s.transfer(BitKey::from_uint(a, 8), BitKey::from_uint(b, 8),
                                      1 + rng() % 20, s.chain.pivot_index()));
        }
        s.advance(pool);
    }
    uint64_t sum = 0;
    for (const auto& [k, v] : s.cur) sum += *decode_balance(v);
    CHECK(sum == 6000);
}

TEST_CASE("involved elements stay bounded by tx count times elements per tx") {
    StateMap alloc;
    for (int i = 1; i <= 4; ++i) alloc[BitKey::from_uint(i, 8)] = encode_balance(1000);
    ChainSim s(4, 3, 8, alloc);
    std::mt19937_64 rng(3);
    std::deque<Transaction> pool;
    for (int j = 0; j < 10; ++j) {
        int a = 1 + int(rng() % 4), b = 1 + int(rng() % 4);
        if (a == b) b = a % 4 + 1;
        pool.push_back(s.transfer(BitKey::from_uint(a, 8), BitKey::from_uint(b, 8), 1,
                                  s.chain.pivot_index()));
    }
    auto made = s.chain.make_block(pool, 100, s.scheme);
    CHECK(pads::explicit_leaves(made.block.tau).size() <= made.block.txs.size() * 2);
}
