#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ggpp/rng.hpp"
#include "ggpp/tensor.hpp"

namespace ggpp {

enum class Metric { CosineDistance, L2 };

struct IndexEntry {
    std::uint64_t id;
    Tensor vector;
};

struct ScoredId {
    std::uint64_t id;
    double distance;
};

struct RetrievalResult {
    std::vector<ScoredId> hits; // ascending distance
    std::size_t k = 0;

    bool contains(std::uint64_t id) const;
    // 1-based rank of id, or 0 when absent.
    std::size_t rank_of(std::uint64_t id) const;
};

double metric_distance(Metric m, const Tensor& a, const Tensor& b);

// Hierarchical navigable small-world graph over passage embeddings.
// Level RNG is seeded so builds replay exactly.
class HnswIndex {
public:
    struct Params {
        std::size_t M = 16;
        std::size_t ef_construction = 200;
        std::size_t ef_search = 64;
        Metric metric = Metric::CosineDistance;
        std::uint64_t seed = 0;
    };

    HnswIndex() : rng_(0) {}
    HnswIndex(std::size_t dim, Params params);

    void insert(const IndexEntry& entry);
    RetrievalResult search_topk(const Tensor& query, std::size_t k) const;
    RetrievalResult search_topk(const Tensor& query, std::size_t k, std::size_t ef) const;

    std::size_t size() const { return nodes_.size(); }
    std::size_t dim() const { return dim_; }
    const Params& params() const { return params_; }
    int max_level() const { return max_level_; }
    int level_of(std::size_t internal) const { return static_cast<int>(links_[internal].size()) - 1; }
    std::size_t neighbor_count(std::size_t internal, std::size_t level) const {
        return links_[internal][level].size();
    }
    std::vector<IndexEntry> entries() const;

    void save(const std::string& path) const;
    static HnswIndex load(const std::string& path);

private:
    struct Node {
        std::uint64_t id;
        std::vector<double> vec;
    };

    struct ScoredPos {
        double distance;
        std::size_t pos;
    };

    double dist(const Tensor& q, std::size_t internal) const;
    double dist_nodes(std::size_t a, std::size_t b) const;
    std::size_t greedy_descend(const Tensor& q, std::size_t entry, int from_level,
                               int to_level) const;
    std::vector<ScoredPos> search_layer(const Tensor& q, std::size_t entry, std::size_t ef,
                                        std::size_t level) const;

    std::size_t dim_ = 0;
    Params params_;
    Rng rng_;
    std::vector<Node> nodes_;
    // links_[node][level] -> neighbor positions; size = node's level + 1.
    std::vector<std::vector<std::vector<std::size_t>>> links_;
    std::size_t entry_point_ = 0;
    int max_level_ = -1;
};

// Exact full-scan oracle; ties broken by ascending id.
RetrievalResult exhaustive_search(const std::vector<IndexEntry>& entries, const Tensor& query,
                                  std::size_t k, Metric metric = Metric::CosineDistance);

struct HitCase {
    std::uint64_t expected_id;
    RetrievalResult result;
};

// Fraction of cases whose expected id appears in the top-k hits.
double hit_rate(const std::vector<HitCase>& cases, std::size_t k);

} // namespace ggpp
