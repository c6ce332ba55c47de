#include "eduvl/rouge.hpp"

#include <algorithm>
#include <cmath>

namespace eduvl {

namespace {

RougeScore score_from_counts(RougeVariant variant, long long overlap, long long ref_total,
                             long long cand_total) {
    RougeScore s;
    s.variant = variant;
    s.recall = ref_total > 0 ? static_cast<double>(overlap) / static_cast<double>(ref_total) : 0.0;
    s.precision =
        cand_total > 0 ? static_cast<double>(overlap) / static_cast<double>(cand_total) : 0.0;
    s.f1 = harmonic_f1(s.recall, s.precision);
    return s;
}

}  // namespace

const char* variant_name(RougeVariant v) {
    switch (v) {
        case RougeVariant::R1: return "R1";
        case RougeVariant::R2: return "R2";
        case RougeVariant::RL: return "RL";
    }
    return "R1";
}

double harmonic_f1(double recall, double precision) {
    double denom = recall + precision;
    if (denom <= 0.0) return 0.0;
    return 2.0 * recall * precision / denom;
}

NGramCounts ngrams(const TokenList& tokens, int n) {
    if (n < 1) throw InputError("n-gram order must be >= 1");
    NGramCounts out;
    out.n = n;
    const int count = static_cast<int>(tokens.size()) - n + 1;
    if (count <= 0) return out;
    for (int i = 0; i < count; ++i) {
        std::string key = tokens[i].lower;
        for (int j = 1; j < n; ++j) {
            key += '\x1f';
            key += tokens[i + j].lower;
        }
        ++out.counts[key];
    }
    out.total = count;
    return out;
}

long long overlap_count(const NGramCounts& a, const NGramCounts& b) {
    if (a.n != b.n)
        throw InputError("overlap_count: mismatched n-gram orders " + std::to_string(a.n) +
                         " vs " + std::to_string(b.n));
    const NGramCounts& small = a.counts.size() <= b.counts.size() ? a : b;
    const NGramCounts& large = a.counts.size() <= b.counts.size() ? b : a;
    long long overlap = 0;
    for (const auto& [key, count] : small.counts) {
        auto it = large.counts.find(key);
        if (it != large.counts.end()) overlap += std::min(count, it->second);
    }
    return overlap;
}

RougeScore rouge_n(const TokenList& reference, const TokenList& candidate, int n) {
    NGramCounts ref = ngrams(reference, n);
    NGramCounts cand = ngrams(candidate, n);
    RougeVariant variant = n == 2 ? RougeVariant::R2 : RougeVariant::R1;
    return score_from_counts(variant, overlap_count(ref, cand), ref.total, cand.total);
}

int lcs_length(const TokenList& a, const TokenList& b) {
    const int n = static_cast<int>(a.size());
    const int m = static_cast<int>(b.size());
    if (n == 0 || m == 0) return 0;
    std::vector<int> prev(m + 1, 0);
    std::vector<int> cur(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        for (int j = 1; j <= m; ++j) {
            if (a[i - 1].lower == b[j - 1].lower)
                cur[j] = prev[j - 1] + 1;
            else
                cur[j] = std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

RougeScore rouge_l(const TokenList& reference, const TokenList& candidate) {
    long long lcs = lcs_length(reference, candidate);
    return score_from_counts(RougeVariant::RL, lcs, static_cast<long long>(reference.size()),
                             static_cast<long long>(candidate.size()));
}

void RougeWeights::validate() const {
    if (r1 < 0.0 || r2 < 0.0 || rl < 0.0)
        throw InputError("rouge weights must be non-negative");
    double sum = r1 + r2 + rl;
    if (std::abs(sum - 1.0) > 1e-9) throw InputError("rouge weights must sum to 1");
    if (r1 <= 0.0 && r2 <= 0.0 && rl <= 0.0)
        throw InputError("rouge weights need at least one positive entry");
}

double composite_f1(const TokenList& reference, const TokenList& candidate,
                    const RougeWeights& weights) {
    double value = 0.0;
    if (weights.r1 != 0.0) value += weights.r1 * rouge_n(reference, candidate, 1).f1;
    if (weights.r2 != 0.0) value += weights.r2 * rouge_n(reference, candidate, 2).f1;
    if (weights.rl != 0.0) value += weights.rl * rouge_l(reference, candidate).f1;
    return value;
}

RougeScorer::RougeScorer(TokenList reference)
    : reference_(std::move(reference)),
      ref_unigrams_(ngrams(reference_, 1)),
      ref_bigrams_(ngrams(reference_, 2)) {}

RougeScore RougeScorer::score(const TokenList& candidate, RougeVariant v) const {
    switch (v) {
        case RougeVariant::R1: {
            NGramCounts cand = ngrams(candidate, 1);
            return score_from_counts(v, overlap_count(ref_unigrams_, cand), ref_unigrams_.total,
                                     cand.total);
        }
        case RougeVariant::R2: {
            NGramCounts cand = ngrams(candidate, 2);
            return score_from_counts(v, overlap_count(ref_bigrams_, cand), ref_bigrams_.total,
                                     cand.total);
        }
        case RougeVariant::RL:
            return rouge_l(reference_, candidate);
    }
    return RougeScore{};
}

double RougeScorer::composite(const TokenList& candidate, const RougeWeights& weights) const {
    double value = 0.0;
    if (weights.r1 != 0.0) value += weights.r1 * score(candidate, RougeVariant::R1).f1;
    if (weights.r2 != 0.0) value += weights.r2 * score(candidate, RougeVariant::R2).f1;
    if (weights.rl != 0.0) value += weights.rl * score(candidate, RougeVariant::RL).f1;
    return value;
}

}  // namespace eduvl
