#pragma once

#include <map>
#include <string>

#include "dhtchain/bits.hpp"
#include "dhtchain/bytes.hpp"
#include "dhtchain/hash.hpp"
#include "dhtchain/pads.hpp"

/* Brute-force reference for small key widths. Recomputes every digest by
   walking the complete binary tree over bit-string prefixes, sharing nothing
   with the production tree code beyond the hash primitive and the two
   domain tags. Exponential in width by design; keep width <= 10. */
namespace oracle {

using dhtchain::BitKey;
using dhtchain::Bytes;
using dhtchain::ByteSpan;
using dhtchain::Digest;
using dhtchain::truncated_sha256;
using dhtchain::pads::StateMap;
using dhtchain::pads::StateValue;

inline bool key_has_prefix(const BitKey& key, const std::string& prefix) {
    for (size_t i = 0; i < prefix.size(); ++i)
        if (key.bit(int(i)) != (prefix[i] == '1')) return false;
    return true;
}

inline Digest subtree_digest(const StateMap& state, const std::string& prefix, int width,
                             size_t digest_bytes) {
    if (int(prefix.size()) == width) {
        Bytes payload;
        for (const auto& [k, v] : state)
            if (key_has_prefix(k, prefix)) payload = v.payload();
        uint8_t tag = 0x00;
        return truncated_sha256({ByteSpan(&tag, 1), ByteSpan(payload)}, digest_bytes);
    }
    Digest left = subtree_digest(state, prefix + '0', width, digest_bytes);
    Digest right = subtree_digest(state, prefix + '1', width, digest_bytes);
    uint8_t tag = 0x01;
    return truncated_sha256({ByteSpan(&tag, 1), left.bytes(), right.bytes()}, left.size());
}

inline Digest root(const StateMap& state, int width, size_t digest_bytes) {
    return subtree_digest(state, "", width, digest_bytes);
}

/* Sibling digests along a key's path, leaf to root, recomputed from the
   full map. */
inline std::vector<Digest> sibling_path(const StateMap& state, const BitKey& key,
                                        size_t digest_bytes) {
    std::vector<Digest> path;
    for (int depth = key.width() - 1; depth >= 0; --depth) {
        std::string prefix;
        for (int i = 0; i < depth; ++i) prefix += key.bit(i) ? '1' : '0';
        prefix += key.bit(depth) ? '0' : '1';
        path.push_back(subtree_digest(state, prefix, key.width(), digest_bytes));
    }
    return path;
}

}  // namespace oracle
