#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "eduvl/corpus.hpp"
#include "eduvl/nn.hpp"
#include "eduvl/oracle.hpp"
#include "eduvl/rouge.hpp"

namespace eduvl {

struct Vocabulary {
    static constexpr int pad_id = 0;
    static constexpr int unk_id = 1;
    static constexpr int bou_id = 2;  // begin-of-unit marker, one per EDU
    static constexpr int eou_id = 3;  // end-of-unit marker

    std::vector<std::string> id_to_word;  // specials first, then sorted lowercased words
    std::unordered_map<std::string, int> word_to_id;

    static Vocabulary build(const Corpus& source);
    static Vocabulary from_words(std::vector<std::string> id_to_word);

    int lookup(const std::string& lower) const;
    int size() const { return static_cast<int>(id_to_word.size()); }
};

struct ModelDims {
    int d = 64;
    int heads = 4;
    int encoder_layers = 2;
    int mtl_layers = 4;
    int max_positions = 2312;  // 768-token budget plus unit markers, with headroom

    void validate() const;
};

// Contiguous extraction lengths [k_min, k_max].
struct CandidateConfig {
    int k_min = 6;
    int k_max = 10;

    void validate() const;
    // Each k clamped to the EDU count, deduplicated, strictly increasing.
    std::vector<int> lengths(int edu_count) const;
};

struct LossConfig {
    double rho = 100.0;
    double gamma1 = 0.0;
    double gamma2 = 0.01;
};

struct LossBreakdown {
    double total = 0.0;
    double bce = 0.0;
    double con = 0.0;
    double l1 = 0.0;
    double l2 = 0.0;
};

struct ContrastiveTerms {
    double con = 0.0;
    double l1 = 0.0;
    double l2 = 0.0;
};

// The k highest-probability indices (ties to the lower index), returned in
// document order.
std::vector<int> top_k_indices(const std::vector<double>& probs, int k);

std::vector<std::vector<int>> generate_candidates(const std::vector<double>& probs,
                                                  const CandidateConfig& config);

// Inference-time variant: walks EDUs by descending probability and skips any
// EDU sharing a lowercased trigram with EDUs already accepted for the
// candidate.
std::vector<std::vector<int>> generate_candidates_blocked(const std::vector<double>& probs,
                                                          const CandidateConfig& config,
                                                          const Document& doc);

std::vector<std::string> edu_trigrams(const TokenList& tokens);

double bce_loss(const std::vector<double>& probs, const Labels& labels);

// sims are ordered by descending target score, rank 1 first; ranks in the
// pairwise margin are 1-based.
ContrastiveTerms contrastive_loss(const std::vector<double>& sims, double sim_gt,
                                  const LossConfig& cfg);

LossBreakdown total_loss(double bce, const ContrastiveTerms& con, double rho);

struct RankedCandidate {
    std::vector<int> indices;  // document order
    int k = 0;                 // clamped extraction length that produced it
    double target_score = 0.0;
};

// Scores each candidate against the reference and orders descending; ties go
// to the shorter candidate, then the lexicographically smaller index list.
std::vector<RankedCandidate> sort_candidates_by_rouge(const std::vector<std::vector<int>>& sets,
                                                      const std::vector<int>& ks,
                                                      const Document& doc,
                                                      const Reference& reference,
                                                      const RougeWeights& weights);

template <class T>
struct ModelParams {
    ModelDims dims;
    Vocabulary vocab;
    nn::Param<T> embedding;  // vocab x d
    nn::Matrix<T> positions;  // fixed sinusoidal table
    std::vector<nn::LayerParams<T>> encoder;
    nn::Param<T> cls_w;  // 1 x d
    nn::Param<T> cls_b;  // 1 x 1
    std::vector<nn::LayerParams<T>> mtl;

    std::vector<nn::ParamRef<T>> param_refs();
    void zero_grads();
};

template <class T>
ModelParams<T> init_params(const ModelDims& dims, const Corpus& vocab_source, uint64_t seed);

template <class T>
ModelParams<T> init_params(const ModelDims& dims, Vocabulary vocab, uint64_t seed);

template <class T>
struct EncodeCache {
    std::vector<int> ids;
    std::vector<int> unit_positions;  // position of each EDU's begin marker
    nn::Matrix<T> x0;
    std::vector<nn::LayerCache<T>> layers;
    nn::Matrix<T> edu_vectors;  // m x d
};

// Builds the marker-delimited token sequence for the whole document, runs the
// encoder stack, and returns the hidden state at each EDU's begin marker.
template <class T>
void encode_edus(const ModelParams<T>& params, const Document& doc, EncodeCache<T>& cache);

template <class T>
void encode_edus_backward(ModelParams<T>& params, const EncodeCache<T>& cache,
                          const nn::Matrix<T>& d_edu_vectors);

template <class T>
struct ProbCache {
    std::vector<T> logits;
    std::vector<double> probs;
};

template <class T>
void predict_probs(const ModelParams<T>& params, const nn::Matrix<T>& edu_vectors,
                   ProbCache<T>& cache);

template <class T>
struct PoolCache {
    nn::Matrix<T> input;
    std::vector<nn::LayerCache<T>> layers;
    std::vector<T> pooled;  // mean over positions of the final layer output
};

// Shared document-level encoder: the same stack runs over the full document
// sequence and over each candidate's EDU-vector subsequence.
template <class T>
void encode_representation(const ModelParams<T>& params, const nn::Matrix<T>& input,
                           PoolCache<T>& cache);

template <class T>
void encode_representation_backward(ModelParams<T>& params, const PoolCache<T>& cache,
                                    const std::vector<T>& d_pooled, nn::Matrix<T>& d_input);

template <class T>
double cosine_sim(const std::vector<T>& a, const std::vector<T>& b);

template <class T>
void cosine_backward(const std::vector<T>& a, const std::vector<T>& b, double d_sim,
                     std::vector<T>& d_a, std::vector<T>& d_b);

// Discrete choices of one training step, frozen so the loss is differentiable
// given the plan: candidate index sets in target-score order plus the
// label-derived ground-truth set.
struct StepPlan {
    std::vector<RankedCandidate> candidates;
    std::vector<int> gt_indices;
};

template <class T>
StepPlan make_step_plan(const ModelParams<T>& params, const Document& doc,
                        const Reference& reference, const Labels& labels,
                        const CandidateConfig& config, const RougeWeights& weights);

template <class T>
struct ForwardState {
    EncodeCache<T> enc;
    ProbCache<T> probs;
    PoolCache<T> doc_pool;
    std::vector<PoolCache<T>> cand_pools;
    PoolCache<T> gt_pool;
    std::vector<double> sims;
    double sim_gt = 0.0;
    LossBreakdown loss;
};

template <class T>
void forward_pass(const ModelParams<T>& params, const Document& doc, const Labels& labels,
                  const StepPlan& plan, const LossConfig& cfg, ForwardState<T>& state);

template <class T>
LossBreakdown loss_with_plan(const ModelParams<T>& params, const Document& doc,
                             const Labels& labels, const StepPlan& plan, const LossConfig& cfg);

struct StepResult {
    LossBreakdown loss;
    std::vector<double> target_scores;  // non-increasing by construction
    std::vector<double> sims;
    double sim_gt = 0.0;
};

// Forward plus backward; gradients accumulate into the parameter buffers.
// Throws NumericError naming the first non-finite tensor.
template <class T>
StepResult accumulate_gradients(ModelParams<T>& params, const Document& doc,
                                const Reference& reference, const Labels& labels,
                                const CandidateConfig& config, const LossConfig& cfg,
                                const RougeWeights& weights);

// One full optimization step on a single document.
template <class T>
StepResult train_step(ModelParams<T>& params, const Document& doc, const Reference& reference,
                      const Labels& labels, const CandidateConfig& config, const LossConfig& cfg,
                      const RougeWeights& weights, nn::Adam<T>& optimizer);

struct SummaryOutput {
    std::vector<int> indices;  // document order
    int chosen_k = 0;
    double similarity = 0.0;
    std::string text;
};

template <class T>
SummaryOutput summarize(const ModelParams<T>& params, const Document& doc,
                        const CandidateConfig& config, bool trigram_blocking);

struct DocEval {
    std::string doc_id;
    int chosen_k = 0;
    RougeScore r1, r2, rl;
    SummaryOutput summary;
};

struct EvalReport {
    std::vector<DocEval> docs;
    RougeScore mean_r1, mean_r2, mean_rl;
    std::map<int, int> k_histogram;
};

template <class T>
EvalReport evaluate(const ModelParams<T>& params, const Corpus& corpus,
                    const CandidateConfig& config, bool trigram_blocking, int threads = 0);

}  // namespace eduvl

#include "eduvl/model_impl.hpp"
