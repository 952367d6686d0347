#include <cstdint>
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "dhtchain/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"truncated-chain simulator"};
    app.require_subcommand(0, 1);

    bool size_model = false;
    app.add_flag("--size-model", size_model, "print deployment size estimates and exit");

    std::string run_config, out_prefix = "out";
    dhtchain::cli::RunOverrides run_ov;
    uint64_t run_seed = 0, run_blocks = 0;
    CLI::App* run = app.add_subcommand("run", "run a scenario and write trace + metrics");
    run->add_option("--config", run_config, "scenario config file")->required();
    run->add_option("--out", out_prefix, "output file prefix");
    CLI::Option* rs = run->add_option("--seed", run_seed, "override the config seed");
    CLI::Option* rb = run->add_option("--blocks", run_blocks, "override the slot count");

    std::string trace_path;
    CLI::App* verify = app.add_subcommand("verify", "re-run a recorded trace and compare");
    verify->add_option("trace", trace_path, "trace file produced by run")->required();

    std::string bench_config;
    dhtchain::cli::RunOverrides bench_ov;
    uint64_t bench_seed = 0, bench_blocks = 0;
    CLI::App* bench = app.add_subcommand("bench", "run a scenario and compare against the size model");
    bench->add_option("--config", bench_config, "scenario config file")->required();
    CLI::Option* bs = bench->add_option("--seed", bench_seed, "override the config seed");
    CLI::Option* bb = bench->add_option("--blocks", bench_blocks, "override the slot count");

    CLI11_PARSE(app, argc, argv);

    if (size_model) return dhtchain::cli::print_size_model();
    if (run->parsed()) {
        if (rs->count()) run_ov.seed = run_seed;
        if (rb->count()) run_ov.blocks = run_blocks;
        return dhtchain::cli::cmd_run(run_config, run_ov, out_prefix);
    }
    if (verify->parsed()) return dhtchain::cli::cmd_verify(trace_path);
    if (bench->parsed()) {
        if (bs->count()) bench_ov.seed = bench_seed;
        if (bb->count()) bench_ov.blocks = bench_blocks;
        return dhtchain::cli::cmd_bench(bench_config, bench_ov);
    }

    std::puts(app.help().c_str());
    return 2;
}
