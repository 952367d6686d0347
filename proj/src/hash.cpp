#include "dhtchain/hash.hpp"

#include <openssl/evp.h>

#include <cctype>

namespace dhtchain {

std::string to_hex(ByteSpan data) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(data.size() * 2);
    for (uint8_t b : data) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xf]);
    }
    return out;
}

static int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw CodecError("bad hex digit");
}

Bytes from_hex(const std::string& hex) {
    if (hex.size() % 2) throw CodecError("odd hex length");
    Bytes out;
    out.reserve(hex.size() / 2);
    for (size_t i = 0; i < hex.size(); i += 2)
        out.push_back(uint8_t(hex_nibble(hex[i]) << 4 | hex_nibble(hex[i + 1])));
    return out;
}

Bytes sha256(std::initializer_list<ByteSpan> parts) {
    static thread_local EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 init failed");
    for (const ByteSpan& p : parts)
        if (EVP_DigestUpdate(ctx, p.data(), p.size()) != 1)
            throw Error("sha256 update failed");
    Bytes out(32);
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx, out.data(), &len) != 1 || len != 32)
        throw Error("sha256 final failed");
    return out;
}

Digest truncated_sha256(std::initializer_list<ByteSpan> parts, size_t out_len) {
    Bytes full = sha256(parts);
    return Digest(ByteSpan(full.data(), out_len));
}

}  // namespace dhtchain
