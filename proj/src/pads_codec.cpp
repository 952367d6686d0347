#include "dhtchain/errors.hpp"
#include "dhtchain/pads.hpp"

namespace dhtchain::pads {

static constexpr uint8_t kTagLeaf = 0x00;
static constexpr uint8_t kTagInternal = 0x01;
static constexpr uint8_t kTagStub = 0x02;
static constexpr uint8_t kTagEmpty = 0x03;

static void encode_rec(const Node* n, ByteWriter& w) {
    switch (n->kind()) {
        case NodeKind::leaf:
            w.u8(kTagLeaf);
            w.blob(ByteSpan(n->value().payload()));
            break;
        case NodeKind::internal:
            w.u8(kTagInternal);
            encode_rec(n->left().get(), w);
            encode_rec(n->right().get(), w);
            break;
        case NodeKind::stub:
            w.u8(kTagStub);
            w.raw(n->digest().bytes());
            break;
        case NodeKind::empty:
            w.u8(kTagEmpty);
            w.u8(uint8_t(n->level()));
            break;
    }
}

Bytes encode(const Pads& p) {
    ByteWriter w;
    encode_rec(p.root_node().get(), w);
    return w.take();
}

/* Strict decoder: accepts exactly the canonical forms the builders produce,
   so encode is injective over everything that can be decoded. */
static NodeRef decode_rec(ByteReader& r, int depth, const TreeParams& params) {
    int height = params.width - depth;
    uint8_t tag = r.u8();
    switch (tag) {
        case kTagLeaf: {
            if (depth != params.width) throw CodecError("leaf above full depth");
            Bytes payload = r.blob(1 << 16);
            if (payload.empty()) throw CodecError("null leaf must be encoded empty");
            return Node::leaf(StateValue(std::move(payload)), params.digest_bytes);
        }
        case kTagInternal: {
            if (depth >= params.width) throw CodecError("internal node at full depth");
            NodeRef l = decode_rec(r, depth + 1, params);
            NodeRef r2 = decode_rec(r, depth + 1, params);
            if (l->kind() == NodeKind::empty && r2->kind() == NodeKind::empty)
                throw CodecError("two empty children must collapse");
            if (l->kind() == NodeKind::stub && r2->kind() == NodeKind::stub)
                throw CodecError("two stub children must collapse");
            return Node::internal(std::move(l), std::move(r2));
        }
        case kTagStub: {
            Digest d(r.take(params.digest_bytes));
            if (d == empty_digest(height, params.digest_bytes))
                throw CodecError("stub carrying the all-null digest");
            return Node::stub(std::move(d), height, params.digest_bytes);
        }
        case kTagEmpty: {
            int level = r.u8();
            if (level != height) throw CodecError("empty level does not match depth");
            return Node::empty(level, params.digest_bytes);
        }
        default:
            throw CodecError("unknown node tag");
    }
}

Pads decode(ByteSpan data, TreeParams params) {
    params.validate();
    ByteReader r(data);
    NodeRef root = decode_rec(r, 0, params);
    r.expect_done();
    return Pads(std::move(root), params);
}

}  // namespace dhtchain::pads
