#include "ggpp/vecstore.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <unordered_map>
#include <unordered_set>

#include "ggpp/io.hpp"
#include "ggpp/kernels.hpp"

namespace ggpp {

namespace {
constexpr char kIndexMagic[] = "GGPPIX01";
}

bool RetrievalResult::contains(std::uint64_t id) const { return rank_of(id) != 0; }

std::size_t RetrievalResult::rank_of(std::uint64_t id) const {
    for (std::size_t i = 0; i < hits.size(); ++i)
        if (hits[i].id == id) return i + 1;
    return 0;
}

double metric_distance(Metric m, const Tensor& a, const Tensor& b) {
    if (m == Metric::L2) return l2_distance(a, b);
    return 1.0 - cosine(a, b);
}

HnswIndex::HnswIndex(std::size_t dim, Params params)
    : dim_(dim), params_(params), rng_(params.seed) {
    if (dim == 0) throw ConfigError("hnsw: dimension must be positive");
    if (params.M < 2) throw ConfigError("hnsw: M must be at least 2");
}

double HnswIndex::dist(const Tensor& q, std::size_t internal) const {
    const Node& node = nodes_[internal];
    if (params_.metric == Metric::L2) {
        double acc = 0.0;
        for (std::size_t i = 0; i < dim_; ++i) {
            const double d = q.data[i] - node.vec[i];
            acc += d * d;
        }
        return std::sqrt(acc);
    }
    const double qq = kernels::dot(q.data.data(), q.data.data(), dim_);
    const double nn = kernels::dot(node.vec.data(), node.vec.data(), dim_);
    if (qq == 0.0 || nn == 0.0)
        throw DegenerateVectorError("hnsw: zero-norm vector under cosine metric");
    return 1.0 - kernels::dot(q.data.data(), node.vec.data(), dim_) / std::sqrt(qq * nn);
}

double HnswIndex::dist_nodes(std::size_t a, std::size_t b) const {
    Tensor qa{{dim_}, nodes_[a].vec};
    return dist(qa, b);
}

std::size_t HnswIndex::greedy_descend(const Tensor& q, std::size_t entry, int from_level,
                                      int to_level) const {
    std::size_t cur = entry;
    double cur_d = dist(q, cur);
    for (int level = from_level; level > to_level; --level) {
        bool improved = true;
        while (improved) {
            improved = false;
            for (std::size_t nb : links_[cur][level]) {
                const double d = dist(q, nb);
                if (d < cur_d) {
                    cur = nb;
                    cur_d = d;
                    improved = true;
                }
            }
        }
    }
    return cur;
}

std::vector<HnswIndex::ScoredPos> HnswIndex::search_layer(const Tensor& q, std::size_t entry,
                                                          std::size_t ef,
                                                          std::size_t level) const {
    auto nearer = [](const ScoredPos& a, const ScoredPos& b) { return a.distance > b.distance; };
    auto farther = [](const ScoredPos& a, const ScoredPos& b) { return a.distance < b.distance; };
    std::priority_queue<ScoredPos, std::vector<ScoredPos>, decltype(nearer)> candidates(nearer);
    std::priority_queue<ScoredPos, std::vector<ScoredPos>, decltype(farther)> best(farther);
    std::unordered_set<std::size_t> visited;

    const double d0 = dist(q, entry);
    candidates.push({d0, entry});
    best.push({d0, entry});
    visited.insert(entry);

    while (!candidates.empty()) {
        ScoredPos c = candidates.top();
        if (best.size() >= ef && c.distance > best.top().distance) break;
        candidates.pop();
        for (std::size_t nb : links_[c.pos][level]) {
            if (!visited.insert(nb).second) continue;
            const double d = dist(q, nb);
            if (best.size() < ef || d < best.top().distance) {
                candidates.push({d, nb});
                best.push({d, nb});
                if (best.size() > ef) best.pop();
            }
        }
    }

    std::vector<ScoredPos> out;
    out.reserve(best.size());
    while (!best.empty()) {
        out.push_back(best.top());
        best.pop();
    }
    std::reverse(out.begin(), out.end()); // ascending distance
    return out;
}

void HnswIndex::insert(const IndexEntry& entry) {
    if (entry.vector.size() != dim_)
        throw DimensionError("hnsw insert: vector dimension mismatch");
    for (const Node& node : nodes_)
        if (node.id == entry.id)
            throw ConflictError("hnsw insert: duplicate id");

    const std::size_t pos = nodes_.size();
    nodes_.push_back(Node{entry.id, entry.vector.data});

    // Geometric level distribution with normalization 1/ln(M).
    const double ml = 1.0 / std::log(static_cast<double>(params_.M));
    double u = rng_.uniform();
    while (u <= 0.0) u = rng_.uniform();
    const int level = static_cast<int>(-std::log(u) * ml);
    links_.emplace_back(static_cast<std::size_t>(level) + 1);

    if (pos == 0) {
        entry_point_ = 0;
        max_level_ = level;
        return;
    }

    const Tensor q{{dim_}, entry.vector.data};
    std::size_t cur = greedy_descend(q, entry_point_, max_level_, level);

    for (int l = std::min(level, max_level_); l >= 0; --l) {
        auto found = search_layer(q, cur, params_.ef_construction, static_cast<std::size_t>(l));
        const std::size_t cap = l == 0 ? 2 * params_.M : params_.M;
        // Simple neighbor selection: closest `cap` candidates.
        for (std::size_t i = 0; i < found.size() && links_[pos][l].size() < cap; ++i)
            links_[pos][l].push_back(found[i].pos);
        for (std::size_t nb : links_[pos][l]) {
            auto& back = links_[nb][l];
            back.push_back(pos);
            if (back.size() > cap) {
                // Prune to the `cap` closest neighbors.
                std::vector<ScoredPos> scored;
                scored.reserve(back.size());
                for (std::size_t b : back) scored.push_back({dist_nodes(nb, b), b});
                std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
                    if (a.distance != b.distance) return a.distance < b.distance;
                    return a.pos < b.pos;
                });
                back.clear();
                for (std::size_t i = 0; i < cap; ++i) back.push_back(scored[i].pos);
            }
        }
        if (!found.empty()) cur = found.front().pos;
    }

    if (level > max_level_) {
        max_level_ = level;
        entry_point_ = pos;
    }
}

RetrievalResult HnswIndex::search_topk(const Tensor& query, std::size_t k) const {
    return search_topk(query, k, params_.ef_search);
}

RetrievalResult HnswIndex::search_topk(const Tensor& query, std::size_t k,
                                       std::size_t ef) const {
    if (k < 1) throw ContractError("search_topk: k must be >= 1");
    RetrievalResult result;
    result.k = k;
    if (nodes_.empty()) return result;
    if (query.size() != dim_)
        throw DimensionError("search_topk: query dimension mismatch");

    const std::size_t beam = std::max(ef, k);
    std::size_t entry = greedy_descend(query, entry_point_, max_level_, 0);
    auto found = search_layer(query, entry, beam, 0);
    std::sort(found.begin(), found.end(), [this](const ScoredPos& a, const ScoredPos& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        return nodes_[a.pos].id < nodes_[b.pos].id;
    });
    for (std::size_t i = 0; i < found.size() && i < k; ++i)
        result.hits.push_back({nodes_[found[i].pos].id, found[i].distance});
    return result;
}

std::vector<IndexEntry> HnswIndex::entries() const {
    std::vector<IndexEntry> out;
    out.reserve(nodes_.size());
    for (const Node& node : nodes_)
        out.push_back(IndexEntry{node.id, Tensor{{dim_}, node.vec}});
    return out;
}

void HnswIndex::save(const std::string& path) const {
    io::Writer out(path);
    out.bytes(kIndexMagic, 8);
    out.u64(static_cast<std::uint64_t>(params_.metric));
    out.u64(params_.M);
    out.u64(params_.ef_construction);
    out.u64(params_.ef_search);
    out.u64(params_.seed);
    out.u64(dim_);
    out.u64(nodes_.size());
    out.u64(entry_point_);
    out.u64(static_cast<std::uint64_t>(max_level_ + 1));
    for (const Node& node : nodes_) {
        out.u64(node.id);
        out.bytes(node.vec.data(), node.vec.size() * sizeof(double));
    }
    for (const auto& levels : links_) {
        out.u64(levels.size());
        for (const auto& nbrs : levels) {
            out.u64(nbrs.size());
            for (std::size_t nb : nbrs) out.u64(nb);
        }
    }
    out.finish();
}

HnswIndex HnswIndex::load(const std::string& path) {
    io::Reader in(path);
    char magic[8];
    in.bytes(magic, 8);
    if (std::string(magic, 8) != kIndexMagic)
        throw FormatError("index file: bad magic");
    Params p;
    p.metric = static_cast<Metric>(in.u64());
    p.M = in.u64();
    p.ef_construction = in.u64();
    p.ef_search = in.u64();
    p.seed = in.u64();
    const std::size_t dim = in.u64();
    HnswIndex idx(dim, p);
    const std::size_t count = in.checked_len(dim * sizeof(double));
    idx.entry_point_ = in.u64();
    idx.max_level_ = static_cast<int>(in.u64()) - 1;
    idx.nodes_.resize(count);
    for (Node& node : idx.nodes_) {
        node.id = in.u64();
        node.vec.resize(dim);
        in.bytes(node.vec.data(), dim * sizeof(double));
    }
    idx.links_.resize(count);
    for (auto& levels : idx.links_) {
        levels.resize(in.checked_len(sizeof(std::uint64_t)));
        for (auto& nbrs : levels) {
            nbrs.resize(in.checked_len(sizeof(std::uint64_t)));
            for (std::size_t& nb : nbrs) nb = in.u64();
        }
    }
    in.finish();
    return idx;
}

RetrievalResult exhaustive_search(const std::vector<IndexEntry>& entries, const Tensor& query,
                                  std::size_t k, Metric metric) {
    if (k < 1) throw ContractError("exhaustive_search: k must be >= 1");
    std::vector<ScoredId> scored;
    scored.reserve(entries.size());
    for (const IndexEntry& e : entries)
        scored.push_back({e.id, metric_distance(metric, query, e.vector)});
    std::sort(scored.begin(), scored.end(), [](const ScoredId& a, const ScoredId& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        return a.id < b.id;
    });
    RetrievalResult result;
    result.k = k;
    for (std::size_t i = 0; i < scored.size() && i < k; ++i)
        result.hits.push_back(scored[i]);
    return result;
}

double hit_rate(const std::vector<HitCase>& cases, std::size_t k) {
    if (k < 1) throw ContractError("hit_rate: k must be >= 1");
    if (cases.empty()) throw ContractError("hit_rate: empty case list");
    std::size_t hits = 0;
    for (const HitCase& c : cases) {
        const std::size_t r = c.result.rank_of(c.expected_id);
        if (r != 0 && r <= k) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(cases.size());
}

} // namespace ggpp
