#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace dhtchain::cli {

/* Exit codes: 0 clean, 1 check failure (replay mismatch, conservation or
   oracle fault), 2 usage / config / io error. */

struct RunOverrides {
    std::optional<uint64_t> seed;
    std::optional<uint64_t> blocks;
};

int cmd_run(const std::string& config_path, const RunOverrides& ov,
            const std::string& out_prefix);

int cmd_verify(const std::string& trace_path);

int cmd_bench(const std::string& config_path, const RunOverrides& ov);

int print_size_model();

}  // namespace dhtchain::cli
