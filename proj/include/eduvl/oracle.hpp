#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "eduvl/rouge.hpp"

namespace eduvl {

enum class UnitKind { sentence, edu };
const char* unit_kind_name(UnitKind k);

// A document projected onto one granularity of selectable units.
struct UnitView {
    UnitKind kind = UnitKind::edu;
    std::vector<TokenList> units;

    static UnitView sentences(const Document& doc);
    static UnitView edus(const Document& doc);

    TokenList concat(const std::vector<int>& indices) const;  // document order
    int word_count(const std::vector<int>& indices) const;
};

struct OracleResult {
    UnitKind kind = UnitKind::edu;
    std::vector<int> indices;  // unique, sorted ascending
    RougeScore r1, r2, rl;
    double objective = 0.0;
    // Objective value after each accepted unit; greedy search only.
    std::vector<double> step_objectives;
};

enum class GreedyMode { first_improvement, best_improvement };

// Appends, scan by scan, the first unit whose addition strictly raises the
// composite objective; stops when a scan finds none or max_k units are
// selected. best_improvement instead takes the largest raise per scan.
OracleResult greedy_oracle(const UnitView& view, const Reference& reference, int max_k,
                           const RougeWeights& objective,
                           GreedyMode mode = GreedyMode::first_improvement);

// Maximizes the objective over all subsets of size <= max_k. Ties go to the
// smaller subset, then the lexicographically smaller index list. Guarded to
// |units| <= 20 and max_k <= 8.
OracleResult exhaustive_oracle(const UnitView& view, const Reference& reference, int max_k,
                               const RougeWeights& objective);

struct Labels {
    std::vector<uint8_t> values;  // one 0/1 per EDU

    std::vector<int> positive_indices() const;
};

Labels make_labels(const Document& doc, const Reference& reference, int max_k,
                   const RougeWeights& objective);

OracleResult lead_k(const UnitView& view, int k, const Reference* reference = nullptr);

// Per-variant result of decomposing the sentence-level oracle into EDUs.
struct VariantCheck {
    RougeVariant variant = RougeVariant::R1;
    // Subset of the sentence oracle's component EDUs maximizing this
    // variant's F1 (indices into component_edus).
    std::vector<int> best_subset;
    RougeScore best_score;
    bool satisfied = false;  // best F1 >= sentence oracle F1
    // Subset preserving the full overlap count (equal recall) with maximum
    // precision; the two-step construction.
    std::vector<int> match_preserving_subset;
    RougeScore match_preserving_score;
    bool match_preserving_ok = false;  // recall equal and precision >=
};

struct DominanceReport {
    OracleResult sentence_oracle;
    std::vector<int> component_edus;  // document EDU positions composing the sentence oracle
    std::array<VariantCheck, 3> checks;

    bool all_satisfied() const;
};

// Builds the exhaustive sentence oracle, takes the EDUs composing it, and
// demonstrates per variant an EDU subset scoring at least as high. Guarded
// to <= 16 component EDUs.
DominanceReport verify_edu_dominance(const Document& doc, const Reference& reference,
                                     int max_k_sent, const RougeWeights& objective);

enum class OracleMode { greedy, exhaustive };
OracleMode oracle_mode_from_string(std::string_view s);

struct KindStats {
    UnitKind kind = UnitKind::sentence;
    std::array<RougeScore, 3> mean_scores;  // R1, R2, RL; recall/precision/f1 are means
    double mean_units = 0.0;
    double mean_words = 0.0;
};

struct OracleAnalysis {
    KindStats sentence_stats;
    KindStats edu_stats;
    int documents_analyzed = 0;
    int documents_skipped = 0;  // exhaustive-mode size-guard exclusions
    std::vector<std::string> skipped_doc_ids;
};

OracleAnalysis analyze_corpus(const Corpus& corpus, int max_k_sent, int max_k_edu,
                              const RougeWeights& objective, OracleMode mode, int threads = 0);

std::string analysis_to_csv(const OracleAnalysis& analysis);
std::string analysis_to_json(const OracleAnalysis& analysis);

}  // namespace eduvl
