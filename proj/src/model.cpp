#include "eduvl/model.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace eduvl {

Vocabulary Vocabulary::build(const Corpus& source) {
    if (source.entries.empty()) throw InputError("vocabulary: empty corpus");
    std::unordered_set<std::string> words;
    for (const auto& entry : source.entries)
        for (const auto& sentence : entry.document.sentences)
            for (const auto& edu : sentence.edus)
                for (const auto& token : edu.tokens) words.insert(token.lower);

    std::vector<std::string> sorted(words.begin(), words.end());
    std::sort(sorted.begin(), sorted.end());

    std::vector<std::string> id_to_word = {"<pad>", "<unk>", "<bou>", "<eou>"};
    id_to_word.insert(id_to_word.end(), sorted.begin(), sorted.end());
    return from_words(std::move(id_to_word));
}

Vocabulary Vocabulary::from_words(std::vector<std::string> id_to_word) {
    Vocabulary vocab;
    vocab.id_to_word = std::move(id_to_word);
    for (size_t i = 0; i < vocab.id_to_word.size(); ++i)
        vocab.word_to_id.emplace(vocab.id_to_word[i], static_cast<int>(i));
    return vocab;
}

int Vocabulary::lookup(const std::string& lower) const {
    auto it = word_to_id.find(lower);
    return it == word_to_id.end() ? unk_id : it->second;
}

void ModelDims::validate() const {
    if (d <= 0 || heads <= 0 || encoder_layers <= 0 || mtl_layers <= 0 || max_positions <= 0)
        throw InputError("model dims must be positive");
    if (d % heads != 0)
        throw InputError("model width " + std::to_string(d) + " is not divisible by " +
                         std::to_string(heads) + " heads");
}

void CandidateConfig::validate() const {
    if (k_min < 1 || k_max < k_min)
        throw InputError("candidate lengths require 1 <= k_min <= k_max");
}

std::vector<int> CandidateConfig::lengths(int edu_count) const {
    validate();
    std::vector<int> out;
    for (int k = k_min; k <= k_max; ++k) {
        int clamped = std::min(k, edu_count);
        if (out.empty() || clamped > out.back()) out.push_back(clamped);
    }
    return out;
}

std::vector<int> top_k_indices(const std::vector<double>& probs, int k) {
    std::vector<int> order(probs.size());
    for (size_t i = 0; i < probs.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (probs[static_cast<size_t>(a)] != probs[static_cast<size_t>(b)])
            return probs[static_cast<size_t>(a)] > probs[static_cast<size_t>(b)];
        return a < b;
    });
    order.resize(static_cast<size_t>(std::min<int>(k, static_cast<int>(probs.size()))));
    std::sort(order.begin(), order.end());
    return order;
}

std::vector<std::vector<int>> generate_candidates(const std::vector<double>& probs,
                                                  const CandidateConfig& config) {
    std::vector<std::vector<int>> out;
    for (int k : config.lengths(static_cast<int>(probs.size())))
        out.push_back(top_k_indices(probs, k));
    return out;
}

std::vector<std::string> edu_trigrams(const TokenList& tokens) {
    std::vector<std::string> out;
    for (size_t i = 0; i + 2 < tokens.size(); ++i)
        out.push_back(tokens[i].lower + '\x1f' + tokens[i + 1].lower + '\x1f' + tokens[i + 2].lower);
    return out;
}

std::vector<std::vector<int>> generate_candidates_blocked(const std::vector<double>& probs,
                                                          const CandidateConfig& config,
                                                          const Document& doc) {
    std::vector<const TokenList*> edu_tokens;
    for (const auto& sentence : doc.sentences)
        for (const auto& edu : sentence.edus) edu_tokens.push_back(&edu.tokens);

    std::vector<int> order(probs.size());
    for (size_t i = 0; i < probs.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (probs[static_cast<size_t>(a)] != probs[static_cast<size_t>(b)])
            return probs[static_cast<size_t>(a)] > probs[static_cast<size_t>(b)];
        return a < b;
    });

    // One walk; each candidate is a prefix of the accepted sequence.
    std::vector<int> accepted;
    std::unordered_set<std::string> seen;
    for (int idx : order) {
        std::vector<std::string> trigrams = edu_trigrams(*edu_tokens[static_cast<size_t>(idx)]);
        bool blocked = false;
        for (const auto& t : trigrams) {
            if (seen.count(t)) {
                blocked = true;
                break;
            }
        }
        if (blocked) continue;
        accepted.push_back(idx);
        for (auto& t : trigrams) seen.insert(std::move(t));
    }

    std::vector<std::vector<int>> out;
    for (int k : config.lengths(static_cast<int>(probs.size()))) {
        const int take = std::min<int>(k, static_cast<int>(accepted.size()));
        std::vector<int> indices(accepted.begin(), accepted.begin() + take);
        std::sort(indices.begin(), indices.end());
        out.push_back(std::move(indices));
    }
    return out;
}

double bce_loss(const std::vector<double>& probs, const Labels& labels) {
    if (probs.size() != labels.values.size())
        throw InputError("bce_loss: probability and label lengths differ");
    constexpr double eps = 1e-12;
    double loss = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
        const double p = std::clamp(probs[i], eps, 1.0 - eps);
        if (labels.values[i])
            loss -= std::log(p);
        else
            loss -= std::log(1.0 - p);
    }
    return loss;
}

ContrastiveTerms contrastive_loss(const std::vector<double>& sims, double sim_gt,
                                  const LossConfig& cfg) {
    ContrastiveTerms terms;
    for (double sim : sims) terms.l1 += std::max(0.0, sim - sim_gt + cfg.gamma1);
    const size_t c = sims.size();
    for (size_t i = 0; i < c; ++i) {
        for (size_t j = i + 1; j < c; ++j) {
            terms.l2 += std::max(0.0, sims[j] - sims[i] + static_cast<double>(j - i) * cfg.gamma2);
        }
    }
    terms.con = terms.l1 + terms.l2;
    return terms;
}

LossBreakdown total_loss(double bce, const ContrastiveTerms& con, double rho) {
    LossBreakdown loss;
    loss.bce = bce;
    loss.l1 = con.l1;
    loss.l2 = con.l2;
    loss.con = con.con;
    loss.total = bce + rho * con.con;
    return loss;
}

std::vector<RankedCandidate> sort_candidates_by_rouge(const std::vector<std::vector<int>>& sets,
                                                      const std::vector<int>& ks,
                                                      const Document& doc,
                                                      const Reference& reference,
                                                      const RougeWeights& weights) {
    std::vector<const TokenList*> edu_tokens;
    for (const auto& sentence : doc.sentences)
        for (const auto& edu : sentence.edus) edu_tokens.push_back(&edu.tokens);

    RougeScorer scorer(reference.tokens);
    std::vector<RankedCandidate> ranked;
    for (size_t s = 0; s < sets.size(); ++s) {
        RankedCandidate cand;
        cand.indices = sets[s];
        cand.k = s < ks.size() ? ks[s] : static_cast<int>(sets[s].size());
        TokenList text;
        for (int idx : cand.indices)
            text.insert(text.end(), edu_tokens[static_cast<size_t>(idx)]->begin(),
                        edu_tokens[static_cast<size_t>(idx)]->end());
        cand.target_score = scorer.composite(text, weights);
        ranked.push_back(std::move(cand));
    }
    std::sort(ranked.begin(), ranked.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
        if (a.target_score != b.target_score) return a.target_score > b.target_score;
        if (a.indices.size() != b.indices.size()) return a.indices.size() < b.indices.size();
        return a.indices < b.indices;
    });
    return ranked;
}

namespace detail {

StepPlan plan_from_probs(const std::vector<double>& probs, const Document& doc,
                         const Reference& reference, const Labels& labels,
                         const CandidateConfig& config, const RougeWeights& weights) {
    StepPlan plan;
    std::vector<int> ks = config.lengths(static_cast<int>(probs.size()));
    plan.candidates = sort_candidates_by_rouge(generate_candidates(probs, config), ks, doc,
                                               reference, weights);
    plan.gt_indices = labels.positive_indices();
    return plan;
}

}  // namespace detail
}  // namespace eduvl
