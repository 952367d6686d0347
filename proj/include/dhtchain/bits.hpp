#pragma once

#include <compare>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include "dhtchain/bytes.hpp"

namespace dhtchain {

/* Fixed-width bit string. Serves as both state element key and DHT node id.
   Bit 0 is the first branching decision below the tree root (0 = left), so
   lexicographic order on keys equals numeric order on their bit patterns. */
class BitKey {
public:
    BitKey() = default;
    BitKey(Bytes packed, int width);

    static BitKey from_uint(uint64_t value, int width);
    static BitKey parse(std::string_view bits);
    static BitKey random(std::mt19937_64& rng, int width);

    int width() const { return width_; }
    bool bit(int i) const { return (bytes_[size_t(i) / 8] >> (7 - i % 8)) & 1; }
    const Bytes& packed() const { return bytes_; }

    BitKey with_bit(int i, bool value) const;

    uint64_t to_uint() const;
    std::string str() const;

    friend auto operator<=>(const BitKey& a, const BitKey& b) = default;

private:
    Bytes bytes_;
    int width_ = 0;
};

/* XOR distance between two equal-width bit strings, compared as the integer
   value of the bitwise XOR. */
struct Distance {
    Bytes bytes;

    friend auto operator<=>(const Distance& a, const Distance& b) = default;

    uint64_t to_u64() const;
};

Distance xor_distance(const BitKey& a, const BitKey& b);

/* Length of the common bit prefix; equals the bucket index a peer lands in. */
int common_prefix(const BitKey& a, const BitKey& b);

}  // namespace dhtchain
