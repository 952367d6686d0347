#include "dhtchain/size_model.hpp"

#include <cstdio>
#include <sstream>

#include "dhtchain/errors.hpp"

namespace dhtchain::size_model {

void SizeModelParams::validate() const {
    for (uint64_t v : {key_bits, hash_bytes, bytes_per_element, elements_per_tx, base_tx_bytes,
                       txs_per_block, base_block_bytes, d, f, bandwidth_bits_per_s})
        if (v == 0) throw ConfigError("size model parameters must be positive");
}

SizeEstimate estimate_sizes(const SizeModelParams& p) {
    p.validate();
    SizeEstimate e{};
    e.naive_proof_bytes = p.key_bits * p.hash_bytes;
    e.tx_bytes = p.base_tx_bytes + p.elements_per_tx * p.bytes_per_element;
    e.block_overhead_bytes = p.txs_per_block * p.elements_per_tx * p.bytes_per_element;
    e.sync_bytes = (p.d + p.f) * (p.base_block_bytes + e.block_overhead_bytes);
    e.sync_seconds = double(e.sync_bytes) * 8.0 / double(p.bandwidth_bits_per_s);
    return e;
}

std::string render(const SizeModelParams& p, const SizeEstimate& e) {
    std::ostringstream out;
    out << "size model\n";
    out << "  key_bits             " << p.key_bits << "\n";
    out << "  hash_bytes           " << p.hash_bytes << "\n";
    out << "  bytes_per_element    " << p.bytes_per_element << "\n";
    out << "  elements_per_tx      " << p.elements_per_tx << "\n";
    out << "  base_tx_bytes        " << p.base_tx_bytes << "\n";
    out << "  txs_per_block        " << p.txs_per_block << "\n";
    out << "  base_block_bytes     " << p.base_block_bytes << "\n";
    out << "  d                    " << p.d << "\n";
    out << "  f                    " << p.f << "\n";
    out << "  bandwidth_bits_per_s " << p.bandwidth_bits_per_s << "\n";
    out << "estimates\n";
    out << "  naive_proof_bytes    " << e.naive_proof_bytes << "\n";
    out << "  tx_bytes             " << e.tx_bytes << "\n";
    out << "  block_overhead_bytes " << e.block_overhead_bytes << "\n";
    out << "  sync_bytes           " << e.sync_bytes << "\n";

    /* Two decimals is plenty for a transfer-time estimate. */
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", e.sync_seconds);
    out << "  sync_seconds         " << buf << "\n";
    return out.str();
}

}  // namespace dhtchain::size_model
