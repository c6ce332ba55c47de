#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "eduvl/corpus.hpp"

namespace eduvl {

enum class RougeVariant { R1, R2, RL };

const char* variant_name(RougeVariant v);

struct RougeScore {
    RougeVariant variant = RougeVariant::R1;
    double recall = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
};

double harmonic_f1(double recall, double precision);

// Multiset of contiguous n-token windows over lowercased forms. Keys are the
// window tokens joined with '\x1f'.
struct NGramCounts {
    int n = 1;
    std::unordered_map<std::string, int> counts;
    long long total = 0;  // max(0, token_count - n + 1)
};

NGramCounts ngrams(const TokenList& tokens, int n);

// Clipped multiset intersection size: sum over keys of min(count_a, count_b).
long long overlap_count(const NGramCounts& a, const NGramCounts& b);

RougeScore rouge_n(const TokenList& reference, const TokenList& candidate, int n);

int lcs_length(const TokenList& a, const TokenList& b);

RougeScore rouge_l(const TokenList& reference, const TokenList& candidate);

// Non-negative weights over the three variants' F1 values, summing to 1.
struct RougeWeights {
    double r1 = 0.5;
    double r2 = 0.5;
    double rl = 0.0;

    void validate() const;  // throws InputError on violation
};

double composite_f1(const TokenList& reference, const TokenList& candidate,
                    const RougeWeights& weights);

// Caches the reference-side tables so repeated candidate scoring (oracle
// search, candidate ranking) does not rebuild them.
class RougeScorer {
  public:
    explicit RougeScorer(TokenList reference);

    RougeScore score(const TokenList& candidate, RougeVariant v) const;
    double composite(const TokenList& candidate, const RougeWeights& weights) const;

    const TokenList& reference() const { return reference_; }

  private:
    TokenList reference_;
    NGramCounts ref_unigrams_;
    NGramCounts ref_bigrams_;
};

}  // namespace eduvl
