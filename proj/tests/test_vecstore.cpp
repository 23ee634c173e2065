#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "ggpp/rng.hpp"
#include "ggpp/vecstore.hpp"

using namespace ggpp;

namespace {

Tensor random_vec(std::size_t dim, Rng& rng) {
    Tensor t = Tensor::zeros({dim});
    for (double& v : t.data) v = rng.normal();
    return t;
}

std::vector<IndexEntry> random_entries(std::size_t n, std::size_t dim, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<IndexEntry> entries;
    for (std::size_t i = 0; i < n; ++i)
        entries.push_back({i + 1, random_vec(dim, rng)});
    return entries;
}

HnswIndex build_index(const std::vector<IndexEntry>& entries, HnswIndex::Params p = {}) {
    HnswIndex idx(entries.front().vector.size(), p);
    for (const IndexEntry& e : entries) idx.insert(e);
    return idx;
}

} // namespace

TEST_CASE("insert then search finds the vector at distance zero") {
    Rng rng(1);
    auto entries = random_entries(20, 8, 1);
    HnswIndex idx = build_index(entries);
    for (const IndexEntry& e : entries) {
        const RetrievalResult r = idx.search_topk(e.vector, 1);
        REQUIRE(r.hits.size() == 1);
        CHECK(r.hits[0].id == e.id);
        CHECK(r.hits[0].distance == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("duplicate id and dimension mismatch are rejected") {
    HnswIndex idx(4, {});
    Rng rng(2);
    idx.insert({1, random_vec(4, rng)});
    CHECK_THROWS_AS(idx.insert({1, random_vec(4, rng)}), ConflictError);
    CHECK_THROWS_AS(idx.insert({2, random_vec(5, rng)}), DimensionError);
    CHECK_THROWS_AS(idx.search_topk(random_vec(3, rng), 1), DimensionError);
    CHECK_THROWS_AS(HnswIndex(0, {}), ConfigError);
}

TEST_CASE("ef_search equal to corpus size reproduces the exhaustive oracle") {
    const std::size_t n = 1000, dim = 16;
    auto entries = random_entries(n, dim, 3);
    HnswIndex idx = build_index(entries);
    Rng rng(4);
    for (int q = 0; q < 20; ++q) {
        const Tensor query = random_vec(dim, rng);
        const RetrievalResult approx = idx.search_topk(query, 10, n);
        const RetrievalResult exact = exhaustive_search(entries, query, 10);
        REQUIRE(approx.hits.size() == exact.hits.size());
        for (std::size_t i = 0; i < exact.hits.size(); ++i) {
            CHECK(approx.hits[i].id == exact.hits[i].id);
            CHECK(approx.hits[i].distance ==
                  doctest::Approx(exact.hits[i].distance).epsilon(1e-12));
        }
    }
}

TEST_CASE("recall@10 at default ef_search is at least 0.95") {
    const std::size_t n = 1000, dim = 16;
    auto entries = random_entries(n, dim, 5);
    HnswIndex idx = build_index(entries);
    Rng rng(6);
    std::size_t found = 0, total = 0;
    for (int q = 0; q < 50; ++q) {
        const Tensor query = random_vec(dim, rng);
        const RetrievalResult approx = idx.search_topk(query, 10);
        const RetrievalResult exact = exhaustive_search(entries, query, 10);
        for (const ScoredId& hit : exact.hits) {
            ++total;
            if (approx.contains(hit.id)) ++found;
        }
    }
    CHECK(static_cast<double>(found) / total >= 0.95);
}

TEST_CASE("neighbor lists respect the M bound") {
    auto entries = random_entries(1000, 8, 7);
    HnswIndex::Params p;
    HnswIndex idx = build_index(entries, p);
    for (std::size_t node = 0; node < idx.size(); ++node) {
        const int level = idx.level_of(node);
        for (int l = 0; l <= level; ++l) {
            const std::size_t cap = l == 0 ? 2 * p.M : p.M;
            CHECK(idx.neighbor_count(node, l) <= cap);
        }
    }
}

TEST_CASE("level assignment follows the geometric distribution") {
    // level = floor(-ln(U)/ln(M)), so P(level >= k) = M^-k and the mean is
    // sum over k >= 1 of M^-k = 1/(M-1).
    HnswIndex idx(4, {});
    Rng rng(8);
    double level_sum = 0.0;
    const std::size_t n = 10000;
    for (std::size_t i = 0; i < n; ++i) {
        idx.insert({i + 1, random_vec(4, rng)});
        level_sum += idx.level_of(i);
    }
    const double mean = level_sum / n;
    const double expect = 1.0 / 15.0; // M = 16
    CHECK(mean > 0.75 * expect);
    CHECK(mean < 1.25 * expect);
}

TEST_CASE("exhaustive search breaks distance ties by ascending id") {
    std::vector<IndexEntry> entries;
    entries.push_back({42, Tensor::vec({1.0, 0.0})});
    entries.push_back({7, Tensor::vec({1.0, 0.0})});
    entries.push_back({9, Tensor::vec({0.0, 1.0})});
    const RetrievalResult r = exhaustive_search(entries, Tensor::vec({1.0, 0.0}), 3);
    REQUIRE(r.hits.size() == 3);
    CHECK(r.hits[0].id == 7);
    CHECK(r.hits[1].id == 42);
    CHECK(r.hits[2].id == 9);
}

TEST_CASE("L2 metric behaves as Euclidean distance") {
    std::vector<IndexEntry> entries;
    entries.push_back({1, Tensor::vec({0.0, 0.0})});
    entries.push_back({2, Tensor::vec({3.0, 4.0})});
    HnswIndex::Params p;
    p.metric = Metric::L2;
    HnswIndex idx(2, p);
    for (const auto& e : entries) idx.insert(e);
    const RetrievalResult r = idx.search_topk(Tensor::vec({0.0, 0.1}), 2);
    CHECK(r.hits[0].id == 1);
    CHECK(r.hits[1].distance == doctest::Approx(std::sqrt(9.0 + 3.9 * 3.9)));
    // Zero vectors are fine under L2 but degenerate under cosine.
    idx.insert({3, Tensor::vec({0.0, 0.0})});
    HnswIndex cos_idx(2, {});
    cos_idx.insert({1, Tensor::vec({1.0, 0.0})});
    CHECK_THROWS_AS(cos_idx.search_topk(Tensor::vec({0.0, 0.0}), 1),
                    DegenerateVectorError);
}

TEST_CASE("save and load reproduce search results exactly") {
    const std::string path = "/tmp/ggpp_index_test.bin";
    auto entries = random_entries(200, 8, 9);
    HnswIndex idx = build_index(entries);
    idx.save(path);
    HnswIndex loaded = HnswIndex::load(path);
    CHECK(loaded.size() == idx.size());
    Rng rng(10);
    for (int q = 0; q < 10; ++q) {
        const Tensor query = random_vec(8, rng);
        const RetrievalResult a = idx.search_topk(query, 5);
        const RetrievalResult b = loaded.search_topk(query, 5);
        REQUIRE(a.hits.size() == b.hits.size());
        for (std::size_t i = 0; i < a.hits.size(); ++i) {
            CHECK(a.hits[i].id == b.hits[i].id);
            CHECK(a.hits[i].distance == b.hits[i].distance);
        }
    }
    std::remove(path.c_str());
}

TEST_CASE("seeded builds replay identically") {
    auto entries = random_entries(300, 8, 11);
    HnswIndex a = build_index(entries);
    HnswIndex b = build_index(entries);
    Rng rng(12);
    for (int q = 0; q < 10; ++q) {
        const Tensor query = random_vec(8, rng);
        const auto ra = a.search_topk(query, 10);
        const auto rb = b.search_topk(query, 10);
        REQUIRE(ra.hits.size() == rb.hits.size());
        for (std::size_t i = 0; i < ra.hits.size(); ++i)
            CHECK(ra.hits[i].id == rb.hits[i].id);
    }
}

TEST_CASE("RetrievalResult rank bookkeeping") {
    RetrievalResult r;
    r.hits = {{5, 0.1}, {2, 0.2}, {9, 0.3}};
    CHECK(r.rank_of(5) == 1);
    CHECK(r.rank_of(9) == 3);
    CHECK(r.rank_of(1) == 0);
    CHECK(r.contains(2));
    CHECK(!r.contains(4));
}

TEST_CASE("hit_rate counts expected ids within k and validates input") {
    RetrievalResult hit;
    hit.hits = {{1, 0.0}, {2, 0.1}};
    RetrievalResult miss;
    miss.hits = {{3, 0.0}};
    std::vector<HitCase> cases{{1, hit}, {2, hit}, {1, miss}};
    CHECK(hit_rate(cases, 2) == doctest::Approx(2.0 / 3.0));
    CHECK(hit_rate(cases, 1) == doctest::Approx(1.0 / 3.0));
    CHECK_THROWS_AS(hit_rate({}, 10), ContractError);
    CHECK_THROWS_AS(hit_rate(cases, 0), ContractError);
}
