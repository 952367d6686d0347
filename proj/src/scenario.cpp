#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <set>
#include <sstream>

#include "dhtchain/errors.hpp"
#include "dhtchain/simnet.hpp"

namespace dhtchain::simnet {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(uint8_t(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(uint8_t(s.back()))) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    size_t start = 0;
    while (start <= s.size()) {
        size_t end = s.find(sep, start);
        if (end == std::string_view::npos) end = s.size();
        out.push_back(trim(s.substr(start, end - start)));
        start = end + 1;
    }
    if (out.size() == 1 && out[0].empty()) out.clear();
    return out;
}

uint64_t parse_u64(std::string_view key, std::string_view v) {
    uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw ConfigError("bad integer for " + std::string(key) + ": " + std::string(v));
    return out;
}

int parse_int(std::string_view key, std::string_view v) {
    uint64_t out = parse_u64(key, v);
    if (out > uint64_t(INT32_MAX)) throw ConfigError(std::string(key) + " out of range");
    return int(out);
}

double parse_double(std::string_view key, std::string_view v) {
    double out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw ConfigError("bad number for " + std::string(key) + ": " + std::string(v));
    return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw ConfigError("bad flag for " + std::string(key) + ": " + std::string(v));
}

std::string fmt_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    (void)ec;
    return std::string(buf, p);
}

std::string fmt_opt_out(const std::vector<int>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

std::string fmt_churn(const std::vector<ChurnEvent>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i].node) + ':' + std::to_string(v[i].leave_slot) + ':' +
               std::to_string(v[i].rejoin_slot);
    }
    return out;
}

}  // namespace

ScenarioConfig ScenarioConfig::parse(std::string_view text) {
    ScenarioConfig cfg;
    size_t pos = 0;
    int lineno = 0;
    while (pos <= text.size()) {
        size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++lineno;
        if (size_t hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        size_t eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        std::string_view key = trim(line.substr(0, eq));
        std::string_view val = trim(line.substr(eq + 1));

        if (key == "nodes") cfg.nodes = parse_int(key, val);
        else if (key == "storage_opt_out") {
            cfg.storage_opt_out.clear();
            for (auto part : split(val, ',')) cfg.storage_opt_out.push_back(parse_int(key, part));
        } else if (key == "width") cfg.width = parse_int(key, val);
        else if (key == "digest_bytes") cfg.digest_bytes = parse_int(key, val);
        else if (key == "d") cfg.d = parse_int(key, val);
        else if (key == "f") cfg.f = parse_int(key, val);
        else if (key == "block_time") cfg.block_time = parse_double(key, val);
        else if (key == "replication") cfg.replication = parse_int(key, val);
        else if (key == "bucket_capacity") cfg.bucket_capacity = parse_int(key, val);
        else if (key == "accounts") cfg.accounts = parse_int(key, val);
        else if (key == "data_elements") cfg.data_elements = parse_int(key, val);
        else if (key == "initial_balance") cfg.initial_balance = parse_u64(key, val);
        else if (key == "blocks") cfg.blocks = parse_u64(key, val);
        else if (key == "max_txs_per_block") cfg.max_txs_per_block = parse_int(key, val);
        else if (key == "tx_per_slot") cfg.tx_per_slot = parse_int(key, val);
        else if (key == "generic_ratio") cfg.generic_ratio = parse_double(key, val);
        else if (key == "elements_min") cfg.elements_min = parse_int(key, val);
        else if (key == "elements_max") cfg.elements_max = parse_int(key, val);
        else if (key == "max_transfer_amount") cfg.max_transfer_amount = parse_u64(key, val);
        else if (key == "dht_hop_delay") cfg.dht_hop_delay = parse_double(key, val);
        else if (key == "propagation_delay") cfg.propagation_delay = parse_double(key, val);
        else if (key == "propagation_jitter") cfg.propagation_jitter = parse_double(key, val);
        else if (key == "fork_at") cfg.fork_at = parse_u64(key, val);
        else if (key == "fork_len") cfg.fork_len = parse_u64(key, val);
        else if (key == "churn") {
            cfg.churn.clear();
            for (auto part : split(val, ',')) {
                auto fields = split(part, ':');
                if (fields.size() != 3)
                    throw ConfigError("churn entries are node:leave:rejoin");
                ChurnEvent ev;
                ev.node = parse_int("churn node", fields[0]);
                ev.leave_slot = parse_u64("churn leave", fields[1]);
                ev.rejoin_slot = parse_u64("churn rejoin", fields[2]);
                cfg.churn.push_back(ev);
            }
        } else if (key == "seed") cfg.seed = parse_u64(key, val);
        else if (key == "oracle_check") cfg.oracle_check = parse_bool(key, val);
        else throw ConfigError("unknown key: " + std::string(key));
    }
    return cfg;
}

std::string ScenarioConfig::echo() const {
    std::ostringstream o;
    o << "nodes = " << nodes << '\n';
    o << "storage_opt_out = " << fmt_opt_out(storage_opt_out) << '\n';
    o << "width = " << width << '\n';
    o << "digest_bytes = " << digest_bytes << '\n';
    o << "d = " << d << '\n';
    o << "f = " << f << '\n';
    o << "block_time = " << fmt_double(block_time) << '\n';
    o << "replication = " << replication << '\n';
    o << "bucket_capacity = " << bucket_capacity << '\n';
    o << "accounts = " << accounts << '\n';
    o << "data_elements = " << data_elements << '\n';
    o << "initial_balance = " << initial_balance << '\n';
    o << "blocks = " << blocks << '\n';
    o << "max_txs_per_block = " << max_txs_per_block << '\n';
    o << "tx_per_slot = " << tx_per_slot << '\n';
    o << "generic_ratio = " << fmt_double(generic_ratio) << '\n';
    o << "elements_min = " << elements_min << '\n';
    o << "elements_max = " << elements_max << '\n';
    o << "max_transfer_amount = " << max_transfer_amount << '\n';
    o << "dht_hop_delay = " << fmt_double(dht_hop_delay) << '\n';
    o << "propagation_delay = " << fmt_double(propagation_delay) << '\n';
    o << "propagation_jitter = " << fmt_double(propagation_jitter) << '\n';
    o << "fork_at = " << fork_at << '\n';
    o << "fork_len = " << fork_len << '\n';
    o << "churn = " << fmt_churn(churn) << '\n';
    o << "seed = " << seed << '\n';
    o << "oracle_check = " << (oracle_check ? 1 : 0) << '\n';
    return o.str();
}

ledger::ChainParams ScenarioConfig::chain_params() const {
    ledger::ChainParams p;
    p.d = d;
    p.f = f;
    p.block_time = block_time;
    p.tree.width = width;
    p.tree.digest_bytes = size_t(digest_bytes);
    return p;
}

void ScenarioConfig::validate() const {
    chain_params().validate();
    if (nodes < 1 || nodes > 1024) throw ConfigError("nodes must be in [1, 1024]");
    std::set<int> opted;
    for (int i : storage_opt_out) {
        if (i < 0 || i >= nodes) throw ConfigError("storage_opt_out index out of range");
        if (!opted.insert(i).second) throw ConfigError("duplicate storage_opt_out index");
    }
    if (int(opted.size()) >= nodes) throw ConfigError("at least one storage node is required");
    if (replication < 1) throw ConfigError("replication must be positive");
    if (bucket_capacity < 1) throw ConfigError("bucket_capacity must be positive");
    if (accounts < 2) throw ConfigError("need at least two accounts");
    if (data_elements < 1) throw ConfigError("data_elements must be positive");
    if (elements_min < 1 || elements_max < elements_min)
        throw ConfigError("bad element count bounds");
    if (generic_ratio < 0 || generic_ratio > 1) throw ConfigError("generic_ratio must be in [0,1]");
    if (generic_ratio > 0 && data_elements < elements_max)
        throw ConfigError("data_elements must cover elements_max");
    double space = std::pow(2.0, std::min(width, 40));
    if (double(accounts) + double(data_elements) > space / 2)
        throw ConfigError("key universe too dense for the key width");
    if (initial_balance > UINT64_MAX / uint64_t(accounts))
        throw ConfigError("total allocation overflows");
    if (blocks < 1) throw ConfigError("blocks must be positive");
    if (max_txs_per_block < 0) throw ConfigError("max_txs_per_block must be non-negative");
    if (tx_per_slot < 0) throw ConfigError("tx_per_slot must be non-negative");
    if (max_transfer_amount < 1) throw ConfigError("max_transfer_amount must be positive");
    if (dht_hop_delay < 0 || propagation_delay < 0 || propagation_jitter < 0)
        throw ConfigError("delays must be non-negative");
    if (propagation_delay + propagation_jitter >= block_time)
        throw ConfigError("propagation must complete within a slot");
    if (fork_at > 0) {
        if (fork_len < 1) throw ConfigError("fork_len must be positive when fork_at is set");
        if (fork_len > uint64_t(f)) throw ConfigError("fork_len may not exceed f");
        if (fork_at + fork_len > blocks) throw ConfigError("fork must resolve within the run");
        if (nodes < 2) throw ConfigError("forks need at least two nodes");
    }
    std::set<int> churned;
    for (const ChurnEvent& ev : churn) {
        if (ev.node < 0 || ev.node >= nodes) throw ConfigError("churn node out of range");
        if (!churned.insert(ev.node).second)
            throw ConfigError("at most one churn cycle per node");
        if (ev.leave_slot < 1 || ev.rejoin_slot <= ev.leave_slot || ev.rejoin_slot > blocks)
            throw ConfigError("churn needs 1 <= leave < rejoin <= blocks");
        if (fork_at > 0 && ev.leave_slot <= fork_at + fork_len && ev.rejoin_slot >= fork_at)
            throw ConfigError("churn may not overlap the injected fork");
        if (!opted.count(ev.node) && replication < 2)
            throw ConfigError("storer churn needs replication >= 2");
    }
}

uint64_t RunMetrics::get(const std::string& name) const {
    auto it = values.find(name);
    return it == values.end() ? 0 : it->second;
}

std::string RunMetrics::text() const {
    std::string out;
    for (const auto& [k, v] : values) out += k + "=" + std::to_string(v) + "\n";
    return out;
}

}  // namespace dhtchain::simnet
