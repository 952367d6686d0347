#include "dhtchain/bits.hpp"

#include "dhtchain/errors.hpp"

namespace dhtchain {

static size_t packed_size(int width) {
    return (size_t(width) + 7) / 8;
}

BitKey::BitKey(Bytes packed, int width) : bytes_(std::move(packed)), width_(width) {
    if (width < 1 || width > 160) throw WidthMismatch("key width out of range");
    if (bytes_.size() != packed_size(width)) throw WidthMismatch("packed size mismatch");
    if (width % 8) {
        uint8_t mask = uint8_t(0xff >> (width % 8));
        if (bytes_.back() & mask) throw WidthMismatch("unused key bits set");
    }
}

BitKey BitKey::from_uint(uint64_t value, int width) {
    if (width < 1 || width > 64) throw WidthMismatch("from_uint width out of range");
    if (width < 64 && (value >> width)) throw WidthMismatch("value exceeds width");
    Bytes packed(packed_size(width), 0);
    for (int i = 0; i < width; ++i) {
        if ((value >> (width - 1 - i)) & 1) packed[size_t(i) / 8] |= uint8_t(0x80 >> (i % 8));
    }
    return BitKey(std::move(packed), width);
}

BitKey BitKey::parse(std::string_view bits) {
    Bytes packed(packed_size(int(bits.size())), 0);
    for (size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] == '1')
            packed[i / 8] |= uint8_t(0x80 >> (i % 8));
        else if (bits[i] != '0')
            throw WidthMismatch("bad bit character");
    }
    return BitKey(std::move(packed), int(bits.size()));
}

BitKey BitKey::random(std::mt19937_64& rng, int width) {
    Bytes packed(packed_size(width), 0);
    for (auto& b : packed) b = uint8_t(rng());
    if (width % 8) packed.back() &= uint8_t(0xff << (8 - width % 8));
    return BitKey(std::move(packed), width);
}

BitKey BitKey::with_bit(int i, bool value) const {
    Bytes packed = bytes_;
    uint8_t mask = uint8_t(0x80 >> (i % 8));
    if (value)
        packed[size_t(i) / 8] |= mask;
    else
        packed[size_t(i) / 8] &= uint8_t(~mask);
    return BitKey(std::move(packed), width_);
}

uint64_t BitKey::to_uint() const {
    if (width_ > 64) throw WidthMismatch("key too wide for uint");
    uint64_t v = 0;
    for (int i = 0; i < width_; ++i) v = (v << 1) | uint64_t(bit(i));
    return v;
}

std::string BitKey::str() const {
    std::string s;
    s.reserve(size_t(width_));
    for (int i = 0; i < width_; ++i) s.push_back(bit(i) ? '1' : '0');
    return s;
}

uint64_t Distance::to_u64() const {
    if (bytes.size() > 8) throw WidthMismatch("distance too wide for u64");
    uint64_t v = 0;
    for (uint8_t b : bytes) v = (v << 8) | b;
    return v;
}

Distance xor_distance(const BitKey& a, const BitKey& b) {
    if (a.width() != b.width()) throw WidthMismatch("xor_distance width mismatch");
    Bytes out(a.packed().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.packed()[i] ^ b.packed()[i];
    return Distance{std::move(out)};
}

int common_prefix(const BitKey& a, const BitKey& b) {
    int w = a.width() < b.width() ? a.width() : b.width();
    for (int i = 0; i < w; ++i)
        if (a.bit(i) != b.bit(i)) return i;
    return w;
}

}  // namespace dhtchain
