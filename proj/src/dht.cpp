#include "dhtchain/dht.hpp"

#include <algorithm>
#include <map>

#include "dhtchain/errors.hpp"

namespace dhtchain::dht {

std::vector<NodeId> authority_set(const BitKey& target, std::span<const NodeId> ids,
                                  int replication) {
    std::vector<std::pair<Distance, NodeId>> scored;
    scored.reserve(ids.size());
    for (const NodeId& id : ids) scored.emplace_back(xor_distance(id, target), id);
    std::sort(scored.begin(), scored.end());
    std::vector<NodeId> out;
    out.reserve(scored.size());
    for (auto& [d, id] : scored) out.push_back(std::move(id));
    if (int(out.size()) > replication) out.resize(size_t(std::max(replication, 0)));
    return out;
}

RoutingTable::RoutingTable(NodeId self, int bucket_capacity)
    : self_(std::move(self)), capacity_(bucket_capacity) {
    if (capacity_ < 1) throw ConfigError("bucket capacity must be positive");
    buckets_.resize(size_t(self_.width()));
}

bool RoutingTable::insert(const NodeId& id) {
    if (id.width() != self_.width()) throw WidthMismatch("routing id width");
    if (id == self_) return false;
    auto& bucket = buckets_[size_t(common_prefix(id, self_))];
    auto closer = [&](const NodeId& a, const NodeId& b) {
        return xor_distance(a, self_) < xor_distance(b, self_);
    };
    auto pos = std::lower_bound(bucket.begin(), bucket.end(), id, closer);
    if (pos != bucket.end() && *pos == id) return false;
    bucket.insert(pos, id);
    if (int(bucket.size()) > capacity_) bucket.pop_back();
    return true;
}

bool RoutingTable::erase(const NodeId& id) {
    if (id.width() != self_.width() || id == self_) return false;
    auto& bucket = buckets_[size_t(common_prefix(id, self_))];
    auto it = std::find(bucket.begin(), bucket.end(), id);
    if (it == bucket.end()) return false;
    bucket.erase(it);
    return true;
}

bool RoutingTable::contains(const NodeId& id) const {
    if (id.width() != self_.width() || id == self_) return false;
    const auto& bucket = buckets_[size_t(common_prefix(id, self_))];
    return std::find(bucket.begin(), bucket.end(), id) != bucket.end();
}

size_t RoutingTable::size() const {
    size_t n = 0;
    for (const auto& b : buckets_) n += b.size();
    return n;
}

std::vector<NodeId> RoutingTable::closest(const BitKey& target, size_t count) const {
    std::vector<std::pair<Distance, NodeId>> scored;
    scored.reserve(size());
    for (const auto& b : buckets_)
        for (const NodeId& id : b) scored.emplace_back(xor_distance(id, target), id);
    std::sort(scored.begin(), scored.end());
    if (scored.size() > count) scored.resize(count);
    std::vector<NodeId> out;
    out.reserve(scored.size());
    for (auto& [d, id] : scored) out.push_back(std::move(id));
    return out;
}

std::optional<LookupResult> find_node(const Network& net, const RoutingTable& origin,
                                      const BitKey& target, const LookupParams& p) {
    std::map<Distance, NodeId> candidates;
    std::set<NodeId> queried;
    for (const NodeId& id : origin.closest(target, p.fanout))
        candidates.emplace(xor_distance(id, target), id);

    int hops = 0;
    // the querier knows its own distance for free, so it competes as a result
    std::optional<std::pair<Distance, NodeId>> best{
        {xor_distance(origin.self(), target), origin.self()}};
    for (int step = 0; step < p.max_steps; ++step) {
        auto next = candidates.end();
        for (auto it = candidates.begin(); it != candidates.end(); ++it) {
            if (!queried.count(it->second)) {
                next = it;
                break;
            }
        }
        if (next == candidates.end()) break;
        if (best && best->first < next->first) break;

        queried.insert(next->second);
        ++hops;
        if (!net.online(next->second)) continue;
        if (!best || next->first < best->first) best = *next;
        for (const NodeId& id : net.find_closest(next->second, target, p.fanout))
            if (id != origin.self()) candidates.emplace(xor_distance(id, target), id);
    }

    if (!best) return std::nullopt;
    return LookupResult{best->second, hops};
}

ledger::ElementWitness StorageState::witness_for(const StateKey& key) const {
    if (!stores(key)) throw NotAuthority("key not stored here");
    auto [value, proof] = pads::prove(tree, key);
    ledger::ElementWitness w;
    w.key = key;
    w.value = std::move(value);
    w.proof = std::move(proof);
    w.pivot_index = pivot_index;
    return w;
}

StorageState make_storage(const Pads& tau_pivot, uint64_t pivot_index, std::set<StateKey> keys) {
    StorageState s{pads::prune(tau_pivot, keys), pivot_index, std::move(keys)};
    return s;
}

namespace {

/* Parallel walk of the stored tree against the incoming post-state tree.
   Wherever the incoming tree is concrete it wins; where it is stubbed the
   stored data must already match. */
pads::NodeRef fold_rec(const pads::NodeRef& s, const pads::NodeRef& p, int height,
                       size_t digest_bytes) {
    using pads::Node;
    using pads::NodeKind;

    if (s->digest() == p->digest()) return s;
    if (p->kind() == NodeKind::stub) throw RootMismatch("stored state diverges from chain");
    if (s->kind() == NodeKind::stub) return Node::stub(p->digest(), height, digest_bytes);

    if (p->kind() == NodeKind::leaf || p->kind() == NodeKind::empty) return p;

    // p internal
    pads::NodeRef sl, sr;
    switch (s->kind()) {
        case NodeKind::internal:
            sl = s->left();
            sr = s->right();
            break;
        case NodeKind::empty:
            sl = Node::empty(height - 1, digest_bytes);
            sr = sl;
            break;
        default:
            throw InternalInconsistency("leaf against internal in storage fold");
    }
    return Node::internal(fold_rec(sl, p->left(), height - 1, digest_bytes),
                          fold_rec(sr, p->right(), height - 1, digest_bytes));
}

}  // namespace

bool advance_storage(StorageState& s, const Pads& pivot_tau_bar, uint64_t new_pivot) {
    if (new_pivot != s.pivot_index + 1) return false;
    if (!(pivot_tau_bar.params() == s.tree.params()))
        throw WidthMismatch("storage fold params mismatch");
    const auto& params = s.tree.params();
    Pads folded(fold_rec(s.tree.root_node(), pivot_tau_bar.root_node(), params.width,
                         params.digest_bytes),
                params);
    if (folded.root() != pivot_tau_bar.root())
        throw InternalInconsistency("storage fold root drift");
    s.tree = pads::prune(folded, s.stored);
    s.pivot_index = new_pivot;
    return true;
}

}  // namespace dhtchain::dht
