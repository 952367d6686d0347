#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dhtchain/errors.hpp"

namespace dhtchain {

using Bytes = std::vector<uint8_t>;
using ByteSpan = std::span<const uint8_t>;

std::string to_hex(ByteSpan data);
Bytes from_hex(const std::string& hex);

inline Bytes to_bytes(const std::string& s) {
    return Bytes(s.begin(), s.end());
}

/* Append-only encoder used by all wire formats. Integers are big-endian,
   variable lengths are canonical LEB128. */
class ByteWriter {
public:
    void u8(uint8_t v) { out_.push_back(v); }

    void be64(uint64_t v) {
        for (int i = 7; i >= 0; --i) out_.push_back(uint8_t(v >> (8 * i)));
    }

    void varint(uint64_t v) {
        while (v >= 0x80) {
            out_.push_back(uint8_t(v) | 0x80);
            v >>= 7;
        }
        out_.push_back(uint8_t(v));
    }

    void raw(ByteSpan data) { out_.insert(out_.end(), data.begin(), data.end()); }

    void blob(ByteSpan data) {
        varint(data.size());
        raw(data);
    }

    const Bytes& bytes() const { return out_; }
    Bytes take() { return std::move(out_); }
    size_t size() const { return out_.size(); }

private:
    Bytes out_;
};

class ByteReader {
public:
    explicit ByteReader(ByteSpan data) : data_(data) {}

    uint8_t u8() {
        need(1);
        return data_[pos_++];
    }

    uint64_t be64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v = (v << 8) | data_[pos_++];
        return v;
    }

    uint64_t varint() {
        uint64_t v = 0;
        int shift = 0;
        size_t len = 0;
        uint8_t byte = 0;
        do {
            byte = u8();
            ++len;
            if (shift >= 64 || (shift == 63 && (byte & 0x7f) > 1))
                throw CodecError("varint overflow");
            v |= uint64_t(byte & 0x7f) << shift;
            shift += 7;
        } while (byte & 0x80);
        if (len > 1 && byte == 0) throw CodecError("varint not canonical");
        return v;
    }

    ByteSpan take(size_t n) {
        need(n);
        ByteSpan s = data_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

    Bytes blob(size_t max = SIZE_MAX) {
        uint64_t n = varint();
        if (n > max || n > remaining()) throw CodecError("blob length out of range");
        ByteSpan s = take(size_t(n));
        return Bytes(s.begin(), s.end());
    }

    size_t remaining() const { return data_.size() - pos_; }
    bool done() const { return pos_ == data_.size(); }

    void expect_done() const {
        if (!done()) throw CodecError("trailing bytes");
    }

private:
    void need(size_t n) const {
        if (remaining() < n) throw CodecError("truncated input");
    }

    ByteSpan data_;
    size_t pos_ = 0;
};

}  // namespace dhtchain
