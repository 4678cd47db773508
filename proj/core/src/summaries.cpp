#include "fedps/summaries.hpp"

#include <algorithm>
#include <cmath>

#include "fedps/bytes.hpp"

namespace fedps {

namespace {

void write_header(ByteWriter& w, SummaryTag tag) {
    w.raw(std::string(kSummaryMagic, 4));
    w.u8(static_cast<std::uint8_t>(tag));
    w.u8(kSummaryVersion);
}

ByteReader read_header(const std::string& bytes, SummaryTag expected) {
    ByteReader r(bytes);
    char magic[4];
    for (auto& m : magic) m = static_cast<char>(r.u8());
    if (std::string(magic, 4) != std::string(kSummaryMagic, 4))
        throw ParseError("bad summary magic");
    auto tag = r.u8();
    if (tag != static_cast<std::uint8_t>(expected))
        throw ParseError("unexpected summary type tag " + std::to_string(tag));
    auto version = r.u8();
    if (version != kSummaryVersion)
        throw ParseError("unsupported summary version " + std::to_string(version));
    return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// MomentsSummary

void MomentsSummary::update(double x) {
    if (!std::isfinite(x)) throw InvalidValue("non-finite value in moments update");
    ++n;
    sum += x;
    sum_sq += x * x;
    min = std::min(min, x);
    max = std::max(max, x);
}

void MomentsSummary::merge(const MomentsSummary& other) {
    n += other.n;
    sum += other.sum;
    sum_sq += other.sum_sq;
    min = std::min(min, other.min);
    max = std::max(max, other.max);
}

double MomentsSummary::mean() const {
    if (n == 0) throw EmptySketch("mean of empty summary");
    return sum / static_cast<double>(n);
}

double MomentsSummary::variance() const {
    if (n == 0) throw EmptySketch("variance of empty summary");
    double mu = mean();
    double v = sum_sq / static_cast<double>(n) - mu * mu;
    return v < 0.0 ? 0.0 : v;
}

std::string MomentsSummary::serialize() const {
    ByteWriter w;
    write_header(w, SummaryTag::Moments);
    w.u64(n);
    w.f64(sum);
    w.f64(sum_sq);
    w.f64(min);
    w.f64(max);
    return w.take();
}

MomentsSummary MomentsSummary::deserialize(const std::string& bytes) {
    ByteReader r = read_header(bytes, SummaryTag::Moments);
    MomentsSummary s;
    s.n = r.u64();
    s.sum = r.f64();
    s.sum_sq = r.f64();
    s.min = r.f64();
    s.max = r.f64();
    return s;
}

// ---------------------------------------------------------------------------
// KllSketch

KllSketch::KllSketch(std::uint16_t k, std::uint64_t seed)
    : k_(k), seed_(seed), levels_(1), rng_(seed) {
    if (k_ < 8) throw InvalidValue("KLL k must be >= 8");
}

std::size_t KllSketch::level_capacity(std::size_t level) const {
    // top level holds k items; lower levels shrink geometrically by 2/3
    const double c = 2.0 / 3.0;
    const std::size_t depth = levels_.size() - 1 - level;
    double cap = static_cast<double>(k_) * std::pow(c, static_cast<double>(depth));
    return std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(cap)));
}

std::size_t KllSketch::total_capacity() const {
    std::size_t total = 0;
    for (std::size_t h = 0; h < levels_.size(); ++h) total += level_capacity(h);
    return total;
}

std::size_t KllSketch::retained() const {
    std::size_t total = 0;
    for (const auto& lv : levels_) total += lv.size();
    return total;
}

void KllSketch::update(double x) {
    if (!std::isfinite(x)) throw InvalidValue("non-finite value in KLL update");
    levels_[0].push_back(x);
    ++n_;
    if (retained() > total_capacity()) compress();
}

void KllSketch::compress() {
    while (retained() > total_capacity()) {
        std::size_t h = levels_.size();
        for (std::size_t i = 0; i < levels_.size(); ++i) {
            if (levels_[i].size() >= level_capacity(i)) {
                h = i;
                break;
            }
        }
        if (h == levels_.size()) break;
        if (h + 1 == levels_.size()) levels_.emplace_back();

        std::vector<double> items = std::move(levels_[h]);
        levels_[h].clear();
        std::sort(items.begin(), items.end());
        std::size_t start = 0;
        if (items.size() % 2 == 1) {
            // odd count: one item stays behind at this level
            levels_[h].push_back(items[0]);
            start = 1;
        }
        const bool odd = (rng_() & 1) != 0;
        for (std::size_t i = start + (odd ? 1 : 0); i < items.size(); i += 2)
            levels_[h + 1].push_back(items[i]);
    }
}

void KllSketch::merge(const KllSketch& other) {
    if (other.k_ != k_)
        throw MergeError("KLL merge with mismatched k: " + std::to_string(k_) + " vs " +
                         std::to_string(other.k_));
    if (other.levels_.size() > levels_.size()) levels_.resize(other.levels_.size());
    for (std::size_t h = 0; h < other.levels_.size(); ++h)
        levels_[h].insert(levels_[h].end(), other.levels_[h].begin(), other.levels_[h].end());
    n_ += other.n_;
    if (retained() > total_capacity()) compress();
}

std::vector<std::pair<double, std::uint64_t>> KllSketch::weighted_items() const {
    std::vector<std::pair<double, std::uint64_t>> out;
    out.reserve(retained());
    for (std::size_t h = 0; h < levels_.size(); ++h)
        for (double v : levels_[h]) out.emplace_back(v, std::uint64_t{1} << h);
    std::sort(out.begin(), out.end());
    return out;
}

double KllSketch::quantile(double q) const {
    if (n_ == 0) throw EmptySketch("quantile of empty sketch");
    if (q < 0.0 || q > 1.0) throw InvalidQuantile("quantile " + std::to_string(q));
    auto items = weighted_items();
    const double target = std::max(1.0, q * static_cast<double>(n_));
    double cum = 0.0;
    for (const auto& [v, w] : items) {
        cum += static_cast<double>(w);
        if (cum >= target) return v;
    }
    return items.back().first;
}

double KllSketch::rank(double x) const {
    double cum = 0.0;
    for (const auto& lv : levels_) {
        std::size_t h = static_cast<std::size_t>(&lv - levels_.data());
        for (double v : lv)
            if (v <= x) cum += static_cast<double>(std::uint64_t{1} << h);
    }
    return cum;
}

std::string KllSketch::serialize() const {
    ByteWriter w;
    write_header(w, SummaryTag::Kll);
    w.u64(k_);
    w.u64(seed_);
    w.u64(n_);
    w.u64(levels_.size());
    for (const auto& lv : levels_) {
        w.u64(lv.size());
        for (double v : lv) w.f64(v);
    }
    return w.take();
}

KllSketch KllSketch::deserialize(const std::string& bytes) {
    ByteReader r = read_header(bytes, SummaryTag::Kll);
    auto k = static_cast<std::uint16_t>(r.u64());
    auto seed = r.u64();
    KllSketch s(k, seed);
    s.n_ = r.u64();
    s.levels_.resize(r.u64());
    for (auto& lv : s.levels_) {
        lv.resize(r.u64());
        for (auto& v : lv) v = r.f64();
    }
    if (s.levels_.empty()) s.levels_.resize(1);
    return s;
}

// ---------------------------------------------------------------------------
// FrequentItemsSketch

FrequentItemsSketch::FrequentItemsSketch(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ < 1) throw InvalidValue("frequent-items capacity must be >= 1");
}

void FrequentItemsSketch::update(const std::string& item, std::uint64_t weight) {
    if (weight == 0) return;
    n_ += weight;
    counts_[item] += weight;
    if (counts_.size() > capacity_) prune();
}

void FrequentItemsSketch::prune() {
    while (counts_.size() > capacity_) {
        // subtract the (capacity+1)-th largest count from everything
        std::vector<std::uint64_t> vals;
        vals.reserve(counts_.size());
        for (const auto& [_, c] : counts_) vals.push_back(c);
        std::nth_element(vals.begin(), vals.begin() + capacity_, vals.end(),
                         std::greater<std::uint64_t>());
        std::uint64_t cut = vals[capacity_];
        offset_ += cut;
        for (auto it = counts_.begin(); it != counts_.end();) {
            if (it->second <= cut) {
                it = counts_.erase(it);
            } else {
                it->second -= cut;
                ++it;
            }
        }
    }
}

void FrequentItemsSketch::merge(const FrequentItemsSketch& other) {
    if (other.capacity_ != capacity_)
        throw MergeError("frequent-items merge with mismatched capacity");
    for (const auto& [item, c] : other.counts_) counts_[item] += c;
    n_ += other.n_;
    offset_ += other.offset_;
    if (counts_.size() > capacity_) prune();
}

std::vector<FrequentItemsSketch::HeavyHitter> FrequentItemsSketch::heavy_hitters(
    std::uint64_t threshold) const {
    std::vector<HeavyHitter> out;
    for (const auto& [item, c] : counts_)
        if (c + offset_ > threshold) out.push_back({item, c, c + offset_});
    std::sort(out.begin(), out.end(), [](const HeavyHitter& a, const HeavyHitter& b) {
        if (a.lower != b.lower) return a.lower > b.lower;
        return a.item < b.item;
    });
    return out;
}

std::pair<std::uint64_t, std::uint64_t> FrequentItemsSketch::estimate(
    const std::string& item) const {
    auto it = counts_.find(item);
    if (it == counts_.end()) return {0, offset_};
    return {it->second, it->second + offset_};
}

std::string FrequentItemsSketch::serialize() const {
    ByteWriter w;
    write_header(w, SummaryTag::FrequentItems);
    w.u64(capacity_);
    w.u64(n_);
    w.u64(offset_);
    w.u64(counts_.size());
    for (const auto& [item, c] : counts_) {
        w.str(item);
        w.u64(c);
    }
    return w.take();
}

FrequentItemsSketch FrequentItemsSketch::deserialize(const std::string& bytes) {
    ByteReader r = read_header(bytes, SummaryTag::FrequentItems);
    FrequentItemsSketch s(r.u64());
    s.n_ = r.u64();
    s.offset_ = r.u64();
    std::uint64_t count = r.u64();
    for (std::uint64_t i = 0; i < count; ++i) {
        std::string item = r.str();
        s.counts_[item] = r.u64();
    }
    return s;
}

// ---------------------------------------------------------------------------
// CategorySet

std::string CategorySet::serialize() const {
    ByteWriter w;
    write_header(w, SummaryTag::CategorySet);
    w.u64(items.size());
    for (const auto& s : items) w.str(s);
    return w.take();
}

CategorySet CategorySet::deserialize(const std::string& bytes) {
    ByteReader r = read_header(bytes, SummaryTag::CategorySet);
    CategorySet s;
    std::uint64_t count = r.u64();
    for (std::uint64_t i = 0; i < count; ++i) s.items.insert(r.str());
    return s;
}

}  // namespace fedps
