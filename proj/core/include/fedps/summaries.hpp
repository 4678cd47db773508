#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "fedps/errors.hpp"

namespace fedps {

// Serialized form: 4-byte magic "FPSK" + type tag + version byte + payload.
inline constexpr char kSummaryMagic[4] = {'F', 'P', 'S', 'K'};
inline constexpr std::uint8_t kSummaryVersion = 1;

enum class SummaryTag : std::uint8_t {
    Moments = 1,
    Kll = 2,
    FrequentItems = 3,
    CategorySet = 4,
};

/// Exact first/second moments plus min/max over the present cells of a stream.
struct MomentsSummary {
    std::uint64_t n = 0;
    double sum = 0.0;
    double sum_sq = 0.0;
    double min = std::numeric_limits<double>::infinity();
    double max = -std::numeric_limits<double>::infinity();

    void update(double x);
    void merge(const MomentsSummary& other);

    double mean() const;
    double variance() const;  // population (divide by n)

    std::string serialize() const;
    static MomentsSummary deserialize(const std::string& bytes);
};

/// KLL quantile sketch over doubles with additive rank-error guarantee.
/// Compaction survivors (odd or even positions) are chosen by a per-sketch
/// seeded RNG so runs are reproducible.
class KllSketch {
public:
    static constexpr std::uint16_t kDefaultK = 200;

    explicit KllSketch(std::uint16_t k = kDefaultK, std::uint64_t seed = 0);

    void update(double x);
    void merge(const KllSketch& other);

    std::uint64_t n() const { return n_; }
    std::uint16_t k() const { return k_; }
    bool empty() const { return n_ == 0; }
    std::size_t retained() const;

    /// Value whose rank approximates q*n; returns a retained stream value.
    double quantile(double q) const;
    /// Estimated number of stream items <= x.
    double rank(double x) const;

    std::string serialize() const;
    static KllSketch deserialize(const std::string& bytes);

private:
    std::size_t level_capacity(std::size_t level) const;
    std::size_t total_capacity() const;
    void compress();
    std::vector<std::pair<double, std::uint64_t>> weighted_items() const;

    std::uint16_t k_;
    std::uint64_t seed_;
    std::uint64_t n_ = 0;
    std::vector<std::vector<double>> levels_;  // levels_[h] has weight 2^h per item
    std::mt19937_64 rng_;
};

/// Misra-Gries heavy-hitter counters over strings. `count` is a lower bound
/// on the true frequency; `count + decrement offset` is an upper bound.
class FrequentItemsSketch {
public:
    explicit FrequentItemsSketch(std::size_t capacity = 64);

    void update(const std::string& item, std::uint64_t weight = 1);
    void merge(const FrequentItemsSketch& other);

    std::uint64_t n() const { return n_; }
    std::size_t capacity() const { return capacity_; }
    std::uint64_t error_bound() const { return offset_; }

    struct HeavyHitter {
        std::string item;
        std::uint64_t lower = 0;
        std::uint64_t upper = 0;
    };
    /// Every item whose upper bound exceeds `threshold`, sorted by estimated
    /// count descending, ties lexicographic. Contains every item whose true
    /// count exceeds threshold + error_bound().
    std::vector<HeavyHitter> heavy_hitters(std::uint64_t threshold) const;

    /// (lower, upper) bound on the item's true count.
    std::pair<std::uint64_t, std::uint64_t> estimate(const std::string& item) const;

    const std::map<std::string, std::uint64_t>& counters() const { return counts_; }

    std::string serialize() const;
    static FrequentItemsSketch deserialize(const std::string& bytes);

private:
    void prune();

    std::size_t capacity_;
    std::uint64_t n_ = 0;
    std::uint64_t offset_ = 0;  // total decrement applied; per-item error bound
    std::map<std::string, std::uint64_t> counts_;
};

/// Sorted set of distinct categories; merge is set union.
struct CategorySet {
    std::set<std::string> items;

    void update(const std::string& item) { items.insert(item); }
    void merge(const CategorySet& other) { items.insert(other.items.begin(), other.items.end()); }
    std::vector<std::string> sorted() const { return {items.begin(), items.end()}; }

    std::string serialize() const;
    static CategorySet deserialize(const std::string& bytes);
};

}  // namespace fedps
