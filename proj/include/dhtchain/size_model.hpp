#pragma once

#include <cstdint>
#include <string>

namespace dhtchain::size_model {

/* Deployment-scale wire arithmetic: what witnesses, blocks and a fresh
   node's window sync cost for a given profile. Integer math throughout,
   floating point only for the transfer time. */
struct SizeModelParams {
    uint64_t key_bits = 160;
    uint64_t hash_bytes = 20;
    uint64_t bytes_per_element = 500;
    uint64_t elements_per_tx = 5;
    uint64_t base_tx_bytes = 200;
    uint64_t txs_per_block = 90;
    uint64_t base_block_bytes = 18000;
    uint64_t d = 8;
    uint64_t f = 12;
    uint64_t bandwidth_bits_per_s = 2000000;

    void validate() const;
};

struct SizeEstimate {
    uint64_t naive_proof_bytes;
    uint64_t tx_bytes;
    uint64_t block_overhead_bytes;
    uint64_t sync_bytes;
    double sync_seconds;
};

SizeEstimate estimate_sizes(const SizeModelParams& p);

std::string render(const SizeModelParams& p, const SizeEstimate& e);

}  // namespace dhtchain::size_model
