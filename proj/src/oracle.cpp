#include "eduvl/oracle.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <thread>

#include <json.hpp>

namespace eduvl {

namespace {

// Visits all size-k index combinations of [0, n) in lexicographic order.
template <typename Visitor>
void for_each_combination(int n, int k, Visitor&& visit) {
    if (k > n || k < 0) return;
    std::vector<int> comb(k);
    for (int i = 0; i < k; ++i) comb[i] = i;
    while (true) {
        visit(comb);
        int i = k - 1;
        while (i >= 0 && comb[i] == n - k + i) --i;
        if (i < 0) break;
        ++comb[i];
        for (int j = i + 1; j < k; ++j) comb[j] = comb[j - 1] + 1;
    }
}

std::vector<int> merge_sorted(const std::vector<int>& sorted, int extra) {
    std::vector<int> out;
    out.reserve(sorted.size() + 1);
    auto it = std::lower_bound(sorted.begin(), sorted.end(), extra);
    out.insert(out.end(), sorted.begin(), it);
    out.push_back(extra);
    out.insert(out.end(), it, sorted.end());
    return out;
}

void fill_scores(OracleResult& result, const RougeScorer& scorer, const UnitView& view) {
    TokenList candidate = view.concat(result.indices);
    result.r1 = scorer.score(candidate, RougeVariant::R1);
    result.r2 = scorer.score(candidate, RougeVariant::R2);
    result.rl = scorer.score(candidate, RougeVariant::RL);
}

constexpr int kExhaustiveMaxUnits = 20;
constexpr int kExhaustiveMaxK = 8;
constexpr int kDominanceMaxComponents = 16;

struct DocOracles {
    bool skipped = false;
    OracleResult sentence;
    OracleResult edu;
};

void accumulate_kind(KindStats& stats, const OracleResult& result, const UnitView& view) {
    const RougeScore* scores[3] = {&result.r1, &result.r2, &result.rl};
    for (int v = 0; v < 3; ++v) {
        stats.mean_scores[v].recall += scores[v]->recall;
        stats.mean_scores[v].precision += scores[v]->precision;
        stats.mean_scores[v].f1 += scores[v]->f1;
    }
    stats.mean_units += static_cast<double>(result.indices.size());
    stats.mean_words += static_cast<double>(view.word_count(result.indices));
}

void finalize_kind(KindStats& stats, int count) {
    if (count == 0) return;
    for (int v = 0; v < 3; ++v) {
        stats.mean_scores[v].variant = static_cast<RougeVariant>(v);
        stats.mean_scores[v].recall /= count;
        stats.mean_scores[v].precision /= count;
        stats.mean_scores[v].f1 /= count;
    }
    stats.mean_units /= count;
    stats.mean_words /= count;
}

}  // namespace

const char* unit_kind_name(UnitKind k) {
    return k == UnitKind::sentence ? "sentence" : "edu";
}

UnitView UnitView::sentences(const Document& doc) {
    UnitView view;
    view.kind = UnitKind::sentence;
    for (const auto& sentence : doc.sentences) view.units.push_back(sentence.tokens());
    return view;
}

UnitView UnitView::edus(const Document& doc) {
    UnitView view;
    view.kind = UnitKind::edu;
    for (const auto& sentence : doc.sentences)
        for (const auto& edu : sentence.edus) view.units.push_back(edu.tokens);
    return view;
}

TokenList UnitView::concat(const std::vector<int>& indices) const {
    TokenList out;
    for (int idx : indices)
        out.insert(out.end(), units[static_cast<size_t>(idx)].begin(),
                   units[static_cast<size_t>(idx)].end());
    return out;
}

int UnitView::word_count(const std::vector<int>& indices) const {
    int n = 0;
    for (int idx : indices) n += static_cast<int>(units[static_cast<size_t>(idx)].size());
    return n;
}

OracleResult greedy_oracle(const UnitView& view, const Reference& reference, int max_k,
                           const RougeWeights& objective, GreedyMode mode) {
    RougeScorer scorer(reference.tokens);
    const int n = static_cast<int>(view.units.size());

    OracleResult result;
    result.kind = view.kind;
    std::vector<bool> selected(static_cast<size_t>(n), false);
    double best = 0.0;

    while (static_cast<int>(result.indices.size()) < max_k) {
        int accepted = -1;
        double accepted_value = best;
        for (int i = 0; i < n; ++i) {
            if (selected[static_cast<size_t>(i)]) continue;
            std::vector<int> trial = merge_sorted(result.indices, i);
            double value = scorer.composite(view.concat(trial), objective);
            if (value > accepted_value) {
                accepted = i;
                accepted_value = value;
                if (mode == GreedyMode::first_improvement) break;
            }
        }
        if (accepted < 0) break;
        selected[static_cast<size_t>(accepted)] = true;
        result.indices = merge_sorted(result.indices, accepted);
        best = accepted_value;
        result.step_objectives.push_back(best);
    }
    result.objective = best;
    fill_scores(result, scorer, view);
    return result;
}

OracleResult exhaustive_oracle(const UnitView& view, const Reference& reference, int max_k,
                               const RougeWeights& objective) {
    const int n = static_cast<int>(view.units.size());
    if (n > kExhaustiveMaxUnits)
        throw SizeGuardError("exhaustive oracle: " + std::to_string(n) + " units exceeds limit " +
                             std::to_string(kExhaustiveMaxUnits));
    if (max_k > kExhaustiveMaxK)
        throw SizeGuardError("exhaustive oracle: budget " + std::to_string(max_k) +
                             " exceeds limit " + std::to_string(kExhaustiveMaxK));

    RougeScorer scorer(reference.tokens);
    OracleResult result;
    result.kind = view.kind;
    result.objective = 0.0;  // empty selection

    for (int size = 1; size <= std::min(max_k, n); ++size) {
        for_each_combination(n, size, [&](const std::vector<int>& comb) {
            double value = scorer.composite(view.concat(comb), objective);
            if (value > result.objective) {
                result.objective = value;
                result.indices = comb;
            }
        });
    }
    fill_scores(result, scorer, view);
    return result;
}

std::vector<int> Labels::positive_indices() const {
    std::vector<int> out;
    for (size_t i = 0; i < values.size(); ++i)
        if (values[i]) out.push_back(static_cast<int>(i));
    return out;
}

Labels make_labels(const Document& doc, const Reference& reference, int max_k,
                   const RougeWeights& objective) {
    UnitView view = UnitView::edus(doc);
    OracleResult oracle = greedy_oracle(view, reference, max_k, objective);
    Labels labels;
    labels.values.assign(view.units.size(), 0);
    for (int idx : oracle.indices) labels.values[static_cast<size_t>(idx)] = 1;
    return labels;
}

OracleResult lead_k(const UnitView& view, int k, const Reference* reference) {
    OracleResult result;
    result.kind = view.kind;
    const int take = std::min<int>(k, static_cast<int>(view.units.size()));
    for (int i = 0; i < take; ++i) result.indices.push_back(i);
    if (reference != nullptr) {
        RougeScorer scorer(reference->tokens);
        fill_scores(result, scorer, view);
    }
    return result;
}

bool DominanceReport::all_satisfied() const {
    return checks[0].satisfied && checks[1].satisfied && checks[2].satisfied;
}

DominanceReport verify_edu_dominance(const Document& doc, const Reference& reference,
                                     int max_k_sent, const RougeWeights& objective) {
    DominanceReport report;
    UnitView sentence_view = UnitView::sentences(doc);
    report.sentence_oracle = exhaustive_oracle(sentence_view, reference, max_k_sent, objective);

    // The EDUs composing the selected sentences, in document order.
    std::vector<TokenList> components;
    int flat = 0;
    for (size_t si = 0; si < doc.sentences.size(); ++si) {
        bool picked = std::binary_search(report.sentence_oracle.indices.begin(),
                                         report.sentence_oracle.indices.end(),
                                         static_cast<int>(si));
        for (const auto& edu : doc.sentences[si].edus) {
            if (picked) {
                components.push_back(edu.tokens);
                report.component_edus.push_back(flat);
            }
            ++flat;
        }
    }
    const int c = static_cast<int>(components.size());
    if (c > kDominanceMaxComponents)
        throw SizeGuardError("dominance check: sentence oracle spans " + std::to_string(c) +
                             " EDUs, limit is " + std::to_string(kDominanceMaxComponents));

    RougeScorer scorer(reference.tokens);
    const RougeScore sentence_scores[3] = {report.sentence_oracle.r1, report.sentence_oracle.r2,
                                           report.sentence_oracle.rl};

    // Overlap counts of the full component set, per variant. The full set
    // concatenates to exactly the sentence-oracle text.
    long long full_overlap[3];
    {
        TokenList full;
        for (const auto& unit : components) full.insert(full.end(), unit.begin(), unit.end());
        NGramCounts ref1 = ngrams(reference.tokens, 1);
        NGramCounts ref2 = ngrams(reference.tokens, 2);
        full_overlap[0] = overlap_count(ref1, ngrams(full, 1));
        full_overlap[1] = overlap_count(ref2, ngrams(full, 2));
        full_overlap[2] = lcs_length(reference.tokens, full);
    }

    NGramCounts ref1 = ngrams(reference.tokens, 1);
    NGramCounts ref2 = ngrams(reference.tokens, 2);

    for (int v = 0; v < 3; ++v) {
        report.checks[static_cast<size_t>(v)].variant = static_cast<RougeVariant>(v);
        report.checks[static_cast<size_t>(v)].best_score.variant = static_cast<RougeVariant>(v);
        report.checks[static_cast<size_t>(v)].match_preserving_score.variant =
            static_cast<RougeVariant>(v);
    }
    double best_f1[3] = {-1.0, -1.0, -1.0};
    double best_precision[3] = {-1.0, -1.0, -1.0};

    for (int size = 0; size <= c; ++size) {
        for_each_combination(c, size, [&](const std::vector<int>& comb) {
            TokenList candidate;
            for (int idx : comb)
                candidate.insert(candidate.end(), components[static_cast<size_t>(idx)].begin(),
                                 components[static_cast<size_t>(idx)].end());
            long long overlaps[3];
            long long cand_totals[3];
            NGramCounts cand1 = ngrams(candidate, 1);
            NGramCounts cand2 = ngrams(candidate, 2);
            overlaps[0] = overlap_count(ref1, cand1);
            overlaps[1] = overlap_count(ref2, cand2);
            overlaps[2] = lcs_length(reference.tokens, candidate);
            cand_totals[0] = cand1.total;
            cand_totals[1] = cand2.total;
            cand_totals[2] = static_cast<long long>(candidate.size());
            long long ref_totals[3] = {ref1.total, ref2.total,
                                       static_cast<long long>(reference.tokens.size())};

            for (int v = 0; v < 3; ++v) {
                auto& check = report.checks[static_cast<size_t>(v)];
                RougeScore s;
                s.variant = static_cast<RougeVariant>(v);
                s.recall = ref_totals[v] > 0
                               ? static_cast<double>(overlaps[v]) / static_cast<double>(ref_totals[v])
                               : 0.0;
                s.precision = cand_totals[v] > 0 ? static_cast<double>(overlaps[v]) /
                                                       static_cast<double>(cand_totals[v])
                                                 : 0.0;
                s.f1 = harmonic_f1(s.recall, s.precision);
                if (s.f1 > best_f1[v]) {
                    best_f1[v] = s.f1;
                    check.best_subset = comb;
                    check.best_score = s;
                }
                if (overlaps[v] == full_overlap[v] && s.precision > best_precision[v]) {
                    best_precision[v] = s.precision;
                    check.match_preserving_subset = comb;
                    check.match_preserving_score = s;
                }
            }
        });
    }

    for (int v = 0; v < 3; ++v) {
        auto& check = report.checks[static_cast<size_t>(v)];
        check.satisfied = check.best_score.f1 >= sentence_scores[v].f1;
        check.match_preserving_ok =
            check.match_preserving_score.recall == sentence_scores[v].recall &&
            check.match_preserving_score.precision >= sentence_scores[v].precision;
    }
    return report;
}

OracleMode oracle_mode_from_string(std::string_view s) {
    if (s == "greedy") return OracleMode::greedy;
    if (s == "exhaustive") return OracleMode::exhaustive;
    throw InputError("unknown oracle mode: " + std::string(s));
}

OracleAnalysis analyze_corpus(const Corpus& corpus, int max_k_sent, int max_k_edu,
                              const RougeWeights& objective, OracleMode mode, int threads) {
    if (corpus.entries.empty()) throw InputError("analyze_corpus: empty corpus");

    const size_t n = corpus.entries.size();
    std::vector<DocOracles> results(n);
    auto run_doc = [&](size_t i) {
        const auto& entry = corpus.entries[i];
        UnitView sentence_view = UnitView::sentences(entry.document);
        UnitView edu_view = UnitView::edus(entry.document);
        try {
            if (mode == OracleMode::greedy) {
                results[i].sentence =
                    greedy_oracle(sentence_view, entry.reference, max_k_sent, objective);
                results[i].edu = greedy_oracle(edu_view, entry.reference, max_k_edu, objective);
            } else {
                results[i].sentence =
                    exhaustive_oracle(sentence_view, entry.reference, max_k_sent, objective);
                results[i].edu = exhaustive_oracle(edu_view, entry.reference, max_k_edu, objective);
            }
        } catch (const SizeGuardError&) {
            results[i].skipped = true;
        }
    };

    int worker_count = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
    worker_count = std::max(1, std::min<int>(worker_count, static_cast<int>(n)));
    if (worker_count == 1) {
        for (size_t i = 0; i < n; ++i) run_doc(i);
    } else {
        std::vector<std::thread> workers;
        std::atomic<size_t> next{0};
        for (int w = 0; w < worker_count; ++w) {
            workers.emplace_back([&]() {
                for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) run_doc(i);
            });
        }
        for (auto& t : workers) t.join();
    }

    OracleAnalysis analysis;
    analysis.sentence_stats.kind = UnitKind::sentence;
    analysis.edu_stats.kind = UnitKind::edu;
    for (size_t i = 0; i < n; ++i) {
        if (results[i].skipped) {
            ++analysis.documents_skipped;
            analysis.skipped_doc_ids.push_back(corpus.entries[i].document.doc_id);
            continue;
        }
        ++analysis.documents_analyzed;
        accumulate_kind(analysis.sentence_stats, results[i].sentence,
                        UnitView::sentences(corpus.entries[i].document));
        accumulate_kind(analysis.edu_stats, results[i].edu,
                        UnitView::edus(corpus.entries[i].document));
    }
    finalize_kind(analysis.sentence_stats, analysis.documents_analyzed);
    finalize_kind(analysis.edu_stats, analysis.documents_analyzed);
    return analysis;
}

std::string analysis_to_csv(const OracleAnalysis& analysis) {
    std::string out = "unit_kind,variant,recall,precision,f1,mean_units,mean_words\n";
    char buf[256];
    for (const KindStats* stats : {&analysis.sentence_stats, &analysis.edu_stats}) {
        for (int v = 0; v < 3; ++v) {
            const RougeScore& s = stats->mean_scores[static_cast<size_t>(v)];
            std::snprintf(buf, sizeof(buf), "%s,%s,%.6f,%.6f,%.6f,%.4f,%.4f\n",
                          unit_kind_name(stats->kind), variant_name(static_cast<RougeVariant>(v)),
                          s.recall, s.precision, s.f1, stats->mean_units, stats->mean_words);
            out += buf;
        }
    }
    return out;
}

std::string analysis_to_json(const OracleAnalysis& analysis) {
    nlohmann::json j;
    auto kind_to_json = [](const KindStats& stats) {
        nlohmann::json k;
        for (int v = 0; v < 3; ++v) {
            const RougeScore& s = stats.mean_scores[static_cast<size_t>(v)];
            k[variant_name(static_cast<RougeVariant>(v))] = {
                {"recall", s.recall}, {"precision", s.precision}, {"f1", s.f1}};
        }
        k["mean_units"] = stats.mean_units;
        k["mean_words"] = stats.mean_words;
        return k;
    };
    j["sentence"] = kind_to_json(analysis.sentence_stats);
    j["edu"] = kind_to_json(analysis.edu_stats);
    j["documents_analyzed"] = analysis.documents_analyzed;
    j["documents_skipped"] = analysis.documents_skipped;
    j["skipped_doc_ids"] = analysis.skipped_doc_ids;
    return j.dump(2) + "\n";
}

}  // namespace eduvl
