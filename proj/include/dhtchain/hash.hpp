#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <string>

#include "dhtchain/bytes.hpp"

namespace dhtchain {

constexpr size_t kMaxDigestBytes = 32;
constexpr size_t kDefaultDigestBytes = 20;

/* Fixed-capacity digest. All tree and chain digests are a 256-bit hash
   truncated to a configured length, 20 bytes by default. */
class Digest {
public:
    Digest() = default;

    explicit Digest(ByteSpan data) {
        if (data.size() < 4 || data.size() > kMaxDigestBytes)
            throw Error("digest length out of range");
        len_ = uint8_t(data.size());
        std::copy(data.begin(), data.end(), bytes_.begin());
    }

    static Digest zero(size_t len) {
        Bytes b(len, 0);
        return Digest(ByteSpan(b));
    }

    size_t size() const { return len_; }
    bool empty() const { return len_ == 0; }
    ByteSpan bytes() const { return ByteSpan(bytes_.data(), len_); }
    std::string hex() const { return to_hex(bytes()); }

    friend bool operator==(const Digest& a, const Digest& b) {
        return a.len_ == b.len_ &&
               std::equal(a.bytes_.begin(), a.bytes_.begin() + a.len_, b.bytes_.begin());
    }

    friend std::strong_ordering operator<=>(const Digest& a, const Digest& b) {
        if (auto c = a.len_ <=> b.len_; c != 0) return c;
        return std::lexicographical_compare_three_way(
            a.bytes_.begin(), a.bytes_.begin() + a.len_,
            b.bytes_.begin(), b.bytes_.begin() + b.len_);
    }

private:
    uint8_t len_ = 0;
    std::array<uint8_t, kMaxDigestBytes> bytes_{};
};

/* SHA-256 over the concatenated parts, truncated to out_len bytes. */
Digest truncated_sha256(std::initializer_list<ByteSpan> parts, size_t out_len);

Bytes sha256(std::initializer_list<ByteSpan> parts);

}  // namespace dhtchain
