#include "dhtchain/errors.hpp"
#include "dhtchain/ledger.hpp"

namespace dhtchain::ledger {

/* Body bytes: everything a signature and the tx id cover. Witnesses and the
   signature itself stay outside so they can be refreshed or stripped without
   changing the transaction's identity. */
Bytes tx_body(const Transaction& tx) {
    ByteWriter w;
    w.u8(uint8_t(tx.kind));
    if (tx.kind == TxKind::transfer) {
        w.raw(ByteSpan(tx.from.packed()));
        w.raw(ByteSpan(tx.to.packed()));
        w.be64(tx.amount);
    } else {
        w.varint(tx.reads.size());
        for (const StateKey& k : tx.reads) w.raw(ByteSpan(k.packed()));
        w.varint(tx.writes.size());
        for (const StateKey& k : tx.writes) w.raw(ByteSpan(k.packed()));
        w.be64(tx.salt);
    }
    return w.take();
}

static void write_key(ByteWriter& w, const StateKey& k) {
    w.raw(ByteSpan(k.packed()));
}

static StateKey read_key(ByteReader& r, int width) {
    ByteSpan s = r.take((size_t(width) + 7) / 8);
    return StateKey(Bytes(s.begin(), s.end()), width);
}

Bytes encode_witness(const ElementWitness& wit, const pads::TreeParams& params) {
    if (wit.key.width() != params.width) throw WidthMismatch("witness key width");
    if (int(wit.proof.path.size()) != params.width) throw CodecError("witness proof length");
    ByteWriter w;
    write_key(w, wit.key);
    w.blob(ByteSpan(wit.value.payload()));
    for (const pads::ProofEntry& e : wit.proof.path) {
        w.u8(uint8_t(e.side));
        w.raw(e.sibling.bytes());
    }
    w.be64(wit.pivot_index);
    return w.take();
}

ElementWitness decode_witness(ByteReader& r, const pads::TreeParams& params) {
    ElementWitness wit;
    wit.key = read_key(r, params.width);
    wit.value = StateValue(r.blob(1 << 16));
    wit.proof.key = wit.key;
    wit.proof.path.reserve(size_t(params.width));
    for (int i = 0; i < params.width; ++i) {
        uint8_t side = r.u8();
        if (side > 1) throw CodecError("bad proof side");
        Digest sib(r.take(params.digest_bytes));
        wit.proof.path.push_back({pads::Side(side), std::move(sib)});
    }
    wit.pivot_index = r.be64();
    return wit;
}

static void encode_tx_to(ByteWriter& w, const Transaction& tx, const pads::TreeParams& params,
                         bool with_witnesses) {
    Bytes body = tx_body(tx);
    w.blob(ByteSpan(body));
    w.blob(ByteSpan(tx.signature));
    if (with_witnesses) {
        w.varint(tx.witnesses.size());
        for (const ElementWitness& wit : tx.witnesses) w.raw(ByteSpan(encode_witness(wit, params)));
    }
}

static Transaction decode_tx_body(ByteSpan body, const pads::TreeParams& params) {
    ByteReader r(body);
    Transaction tx;
    uint8_t kind = r.u8();
    if (kind == uint8_t(TxKind::transfer)) {
        tx.kind = TxKind::transfer;
        tx.from = read_key(r, params.width);
        tx.to = read_key(r, params.width);
        tx.amount = r.be64();
    } else if (kind == uint8_t(TxKind::generic)) {
        tx.kind = TxKind::generic;
        uint64_t nr = r.varint();
        if (nr > 1024) throw CodecError("too many reads");
        for (uint64_t i = 0; i < nr; ++i) tx.reads.push_back(read_key(r, params.width));
        uint64_t nw = r.varint();
        if (nw > 1024) throw CodecError("too many writes");
        for (uint64_t i = 0; i < nw; ++i) tx.writes.push_back(read_key(r, params.width));
        tx.salt = r.be64();
    } else {
        throw CodecError("unknown tx kind");
    }
    r.expect_done();
    return tx;
}

static Transaction decode_tx_from(ByteReader& r, const pads::TreeParams& params,
                                  bool with_witnesses) {
    Bytes body = r.blob(1 << 20);
    Transaction tx = decode_tx_body(ByteSpan(body), params);
    tx.signature = r.blob(1 << 10);
    if (with_witnesses) {
        uint64_t n = r.varint();
        if (n > 4096) throw CodecError("too many witnesses");
        for (uint64_t i = 0; i < n; ++i) tx.witnesses.push_back(decode_witness(r, params));
    }
    return tx;
}

Bytes encode_tx(const Transaction& tx, const pads::TreeParams& params) {
    ByteWriter w;
    encode_tx_to(w, tx, params, true);
    return w.take();
}

Transaction decode_tx(ByteSpan data, const pads::TreeParams& params) {
    ByteReader r(data);
    Transaction tx = decode_tx_from(r, params, true);
    r.expect_done();
    return tx;
}

Bytes encode_block(const Block& b) {
    ByteWriter w;
    w.be64(b.index);
    w.raw(b.parent.bytes());
    w.varint(b.txs.size());
    for (const Transaction& tx : b.txs) encode_tx_to(w, tx, b.tau.params(), false);
    w.blob(ByteSpan(pads::encode(b.tau)));
    return w.take();
}

Block decode_block(ByteSpan data, const pads::TreeParams& params) {
    ByteReader r(data);
    uint64_t index = r.be64();
    Digest parent(r.take(params.digest_bytes));
    uint64_t n = r.varint();
    if (n > 100000) throw CodecError("too many transactions");
    std::vector<Transaction> txs;
    txs.reserve(size_t(n));
    for (uint64_t i = 0; i < n; ++i) txs.push_back(decode_tx_from(r, params, false));
    Bytes tau_bytes = r.blob(64 << 20);
    r.expect_done();
    Pads tau = pads::decode(ByteSpan(tau_bytes), params);
    return Block(index, std::move(parent), std::move(txs), std::move(tau));
}

}  // namespace dhtchain::ledger
