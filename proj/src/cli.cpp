#include "dhtchain/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <vector>

#include "dhtchain/errors.hpp"
#include "dhtchain/simnet.hpp"
#include "dhtchain/size_model.hpp"

namespace dhtchain::cli {

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    out << text;
    if (!out) throw Error("short write to " + path);
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t end = text.find('\n', pos);
        if (end == std::string::npos) {
            lines.push_back(text.substr(pos));
            break;
        }
        lines.push_back(text.substr(pos, end - pos));
        pos = end + 1;
    }
    return lines;
}

simnet::ScenarioConfig load_config(const std::string& path, const RunOverrides& ov) {
    simnet::ScenarioConfig cfg = simnet::ScenarioConfig::parse(read_file(path));
    if (ov.seed) cfg.seed = *ov.seed;
    if (ov.blocks) cfg.blocks = *ov.blocks;
    return cfg;
}

bool checks_passed(const simnet::RunMetrics& m) {
    return m.get("archive_complete") == 1 && m.get("conservation_ok") == 1 &&
           m.get("oracle_ok") == 1;
}

void print_summary(const simnet::RunMetrics& m) {
    std::cout << "head " << m.get("head_final") << " pivot " << m.get("pivot_final")
              << " blocks " << m.get("blocks_total") << "\n";
    std::cout << "txs mined " << m.get("txs_mined") << " submitted " << m.get("txs_submitted")
              << " unavailable " << m.get("txs_unavailable") << "\n";
    std::cout << "reorgs " << m.get("reorgs_total") << " max depth " << m.get("reorg_depth_max")
              << " syncs " << m.get("sync_events") << "\n";
    std::cout << "checks: archive " << m.get("archive_complete") << " conservation "
              << m.get("conservation_ok") << " oracle " << m.get("oracle_ok") << "\n";
}

}  // namespace

int cmd_run(const std::string& config_path, const RunOverrides& ov,
            const std::string& out_prefix) {
    try {
        simnet::Simulation sim(load_config(config_path, ov));
        sim.run();

        write_file(out_prefix + ".trace", sim.trace_text());
        write_file(out_prefix + ".metrics", sim.metrics().text());

        print_summary(sim.metrics());
        std::cout << "wrote " << out_prefix << ".trace and " << out_prefix << ".metrics\n";
        return checks_passed(sim.metrics()) ? 0 : 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

int cmd_verify(const std::string& trace_path) {
    try {
        std::string recorded = read_file(trace_path);
        std::vector<std::string> want = split_lines(recorded);

        std::string config_text;
        for (const std::string& line : want)
            if (line.rfind("cfg ", 0) == 0) config_text += line.substr(4) + "\n";
        if (config_text.empty()) {
            std::cerr << "error: " << trace_path << " carries no config echo\n";
            return 2;
        }

        simnet::Simulation sim(simnet::ScenarioConfig::parse(config_text));
        sim.run();
        std::vector<std::string> got = split_lines(sim.trace_text());

        uint64_t last_block = 0;
        bool saw_block = false;
        size_t n = std::min(want.size(), got.size());
        for (size_t i = 0; i < n; ++i) {
            if (want[i] == got[i]) {
                if (want[i].rfind("block h=", 0) == 0) {
                    last_block = std::strtoull(want[i].c_str() + 8, nullptr, 10);
                    saw_block = true;
                }
                continue;
            }
            std::cout << "mismatch at line " << (i + 1) << "\n";
            std::cout << "  recorded: " << want[i] << "\n";
            std::cout << "  replayed: " << got[i] << "\n";
            if (saw_block) std::cout << "  last agreeing block height " << last_block << "\n";
            return 1;
        }
        if (want.size() != got.size()) {
            std::cout << "mismatch: recorded " << want.size() << " lines, replay produced "
                      << got.size() << "\n";
            return 1;
        }
        std::cout << "trace verified: " << want.size() << " lines match\n";
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

int cmd_bench(const std::string& config_path, const RunOverrides& ov) {
    try {
        simnet::Simulation sim(load_config(config_path, ov));
        sim.run();
        const simnet::RunMetrics& m = sim.metrics();

        size_model::SizeModelParams p;
        size_model::SizeEstimate est = size_model::estimate_sizes(p);

        auto avg = [&](const char* total, const char* count) -> uint64_t {
            uint64_t c = m.get(count);
            return c == 0 ? 0 : m.get(total) / c;
        };
        uint64_t tx_avg = avg("tx_bytes_total", "txs_submitted");
        uint64_t block_avg = avg("block_bytes_total", "blocks_total");
        uint64_t sync_avg = avg("sync_bytes_total", "sync_events");

        std::cout << "measured vs model\n";
        std::cout << "  tx bytes      " << tx_avg << " vs " << est.tx_bytes << "\n";
        std::cout << "  block bytes   " << block_avg << " vs "
                  << (p.base_block_bytes + est.block_overhead_bytes) << "\n";
        std::cout << "  sync bytes    " << sync_avg << " vs " << est.sync_bytes << "\n";
        print_summary(m);
        return checks_passed(m) ? 0 : 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

int print_size_model() {
    size_model::SizeModelParams p;
    std::cout << size_model::render(p, size_model::estimate_sizes(p));
    return 0;
}

}  // namespace dhtchain::cli
