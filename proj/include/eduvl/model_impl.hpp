#pragma once

// Template implementations for model.hpp; include that header instead.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace eduvl {

template <class T>
std::vector<nn::ParamRef<T>> ModelParams<T>::param_refs() {
    std::vector<nn::ParamRef<T>> refs;
    refs.push_back({&embedding, "embedding"});
    for (size_t i = 0; i < encoder.size(); ++i)
        encoder[i].collect(refs, "encoder." + std::to_string(i));
    refs.push_back({&cls_w, "classifier.w"});
    refs.push_back({&cls_b, "classifier.b"});
    for (size_t i = 0; i < mtl.size(); ++i) mtl[i].collect(refs, "mtl." + std::to_string(i));
    return refs;
}

template <class T>
void ModelParams<T>::zero_grads() {
    for (auto& ref : param_refs()) ref.param->zero_grad();
}

namespace detail {

template <class T>
void init_layer(nn::LayerParams<T>& layer, std::mt19937_64& rng, double bound) {
    nn::init_uniform(layer.wq.w, rng, bound);
    nn::init_uniform(layer.wk.w, rng, bound);
    nn::init_uniform(layer.wv.w, rng, bound);
    nn::init_uniform(layer.wo.w, rng, bound);
    nn::init_uniform(layer.ff_w1.w, rng, bound);
    nn::init_uniform(layer.ff_w2.w, rng, bound);
    std::fill(layer.ln1_gain.w.a.begin(), layer.ln1_gain.w.a.end(), T(1));
    std::fill(layer.ln2_gain.w.a.begin(), layer.ln2_gain.w.a.end(), T(1));
}

}  // namespace detail

template <class T>
ModelParams<T> init_params(const ModelDims& dims, Vocabulary vocab, uint64_t seed) {
    dims.validate();
    ModelParams<T> params;
    params.dims = dims;
    params.vocab = std::move(vocab);

    std::mt19937_64 rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims.d));

    params.embedding.resize(params.vocab.size(), dims.d);
    nn::init_uniform(params.embedding.w, rng, bound);
    params.positions = nn::sinusoidal_positions<T>(dims.max_positions, dims.d);

    params.encoder.resize(static_cast<size_t>(dims.encoder_layers));
    for (auto& layer : params.encoder) {
        layer.resize(dims.d);
        detail::init_layer(layer, rng, bound);
    }
    params.cls_w.resize(1, dims.d);
    nn::init_uniform(params.cls_w.w, rng, bound);
    params.cls_b.resize(1, 1);

    params.mtl.resize(static_cast<size_t>(dims.mtl_layers));
    for (auto& layer : params.mtl) {
        layer.resize(dims.d);
        detail::init_layer(layer, rng, bound);
    }
    return params;
}

template <class T>
ModelParams<T> init_params(const ModelDims& dims, const Corpus& vocab_source, uint64_t seed) {
    return init_params<T>(dims, Vocabulary::build(vocab_source), seed);
}

template <class T>
void encode_edus(const ModelParams<T>& params, const Document& doc, EncodeCache<T>& cache) {
    cache.ids.clear();
    cache.unit_positions.clear();
    for (const auto& sentence : doc.sentences) {
        for (const auto& edu : sentence.edus) {
            cache.unit_positions.push_back(static_cast<int>(cache.ids.size()));
            cache.ids.push_back(Vocabulary::bou_id);
            for (const auto& token : edu.tokens) cache.ids.push_back(params.vocab.lookup(token.lower));
            cache.ids.push_back(Vocabulary::eou_id);
        }
    }
    const int length = static_cast<int>(cache.ids.size());
    const int d = params.dims.d;
    if (length > params.dims.max_positions)
        throw InputError("document '" + doc.doc_id + "' needs " + std::to_string(length) +
                         " encoder positions, capacity is " +
                         std::to_string(params.dims.max_positions));

    cache.x0 = nn::Matrix<T>(length, d);
    for (int p = 0; p < length; ++p) {
        const T* emb = params.embedding.w.row(cache.ids[static_cast<size_t>(p)]);
        const T* pos = params.positions.row(p);
        T* x = cache.x0.row(p);
        for (int j = 0; j < d; ++j) x[j] = emb[j] + pos[j];
    }

    cache.layers.assign(params.encoder.size(), nn::LayerCache<T>());
    nn::Matrix<T> hidden = cache.x0;
    for (size_t l = 0; l < params.encoder.size(); ++l) {
        nn::Matrix<T> next;
        nn::encoder_layer_forward(params.encoder[l], params.dims.heads, /*pre_norm=*/false,
                                  hidden, next, cache.layers[l]);
        hidden = std::move(next);
    }

    const int m = static_cast<int>(cache.unit_positions.size());
    cache.edu_vectors = nn::Matrix<T>(m, d);
    for (int i = 0; i < m; ++i) {
        const T* src = hidden.row(cache.unit_positions[static_cast<size_t>(i)]);
        std::copy(src, src + d, cache.edu_vectors.row(i));
    }
}

template <class T>
void encode_edus_backward(ModelParams<T>& params, const EncodeCache<T>& cache,
                          const nn::Matrix<T>& d_edu_vectors) {
    const int length = static_cast<int>(cache.ids.size());
    const int d = params.dims.d;
    nn::Matrix<T> d_hidden(length, d);
    for (int i = 0; i < d_edu_vectors.rows; ++i) {
        T* dst = d_hidden.row(cache.unit_positions[static_cast<size_t>(i)]);
        const T* src = d_edu_vectors.row(i);
        for (int j = 0; j < d; ++j) dst[j] += src[j];
    }
    for (size_t l = params.encoder.size(); l-- > 0;) {
        nn::Matrix<T> d_x;
        nn::encoder_layer_backward(params.encoder[l], params.dims.heads, /*pre_norm=*/false,
                                   d_hidden, cache.layers[l], d_x);
        d_hidden = std::move(d_x);
    }
    for (int p = 0; p < length; ++p) {
        T* grad = params.embedding.g.row(cache.ids[static_cast<size_t>(p)]);
        const T* src = d_hidden.row(p);
        for (int j = 0; j < d; ++j) grad[j] += src[j];
    }
}

template <class T>
void predict_probs(const ModelParams<T>& params, const nn::Matrix<T>& edu_vectors,
                   ProbCache<T>& cache) {
    const int m = edu_vectors.rows;
    const int d = edu_vectors.cols;
    cache.logits.assign(static_cast<size_t>(m), T(0));
    cache.probs.assign(static_cast<size_t>(m), 0.0);
    const T* w = params.cls_w.w.row(0);
    const T b = params.cls_b.w.at(0, 0);
    for (int i = 0; i < m; ++i) {
        const T* v = edu_vectors.row(i);
        T z = b;
        for (int j = 0; j < d; ++j) z += w[j] * v[j];
        cache.logits[static_cast<size_t>(i)] = z;
        cache.probs[static_cast<size_t>(i)] = 1.0 / (1.0 + std::exp(-static_cast<double>(z)));
    }
}

template <class T>
void encode_representation(const ModelParams<T>& params, const nn::Matrix<T>& input,
                           PoolCache<T>& cache) {
    cache.input = input;
    cache.layers.assign(params.mtl.size(), nn::LayerCache<T>());
    nn::Matrix<T> hidden = input;
    for (size_t l = 0; l < params.mtl.size(); ++l) {
        nn::Matrix<T> next;
        nn::encoder_layer_forward(params.mtl[l], params.dims.heads, /*pre_norm=*/true, hidden,
                                  next, cache.layers[l]);
        hidden = std::move(next);
    }
    const int d = input.cols;
    const int n = input.rows;
    cache.pooled.assign(static_cast<size_t>(d), T(0));
    for (int i = 0; i < n; ++i) {
        const T* row = hidden.row(i);
        for (int j = 0; j < d; ++j) cache.pooled[static_cast<size_t>(j)] += row[j];
    }
    const T inv = T(1) / T(n);
    for (auto& x : cache.pooled) x *= inv;
}

template <class T>
void encode_representation_backward(ModelParams<T>& params, const PoolCache<T>& cache,
                                    const std::vector<T>& d_pooled, nn::Matrix<T>& d_input) {
    const int n = cache.input.rows;
    const int d = cache.input.cols;
    const T inv = T(1) / T(n);
    nn::Matrix<T> d_hidden(n, d);
    for (int i = 0; i < n; ++i) {
        T* row = d_hidden.row(i);
        for (int j = 0; j < d; ++j) row[j] = d_pooled[static_cast<size_t>(j)] * inv;
    }
    for (size_t l = params.mtl.size(); l-- > 0;) {
        nn::Matrix<T> d_x;
        nn::encoder_layer_backward(params.mtl[l], params.dims.heads, /*pre_norm=*/true, d_hidden,
                                   cache.layers[l], d_x);
        d_hidden = std::move(d_x);
    }
    d_input = std::move(d_hidden);
}

template <class T>
double cosine_sim(const std::vector<T>& a, const std::vector<T>& b) {
    T dot = T(0), na = T(0), nb = T(0);
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == T(0) || nb == T(0)) return 0.0;
    return static_cast<double>(dot / (std::sqrt(na) * std::sqrt(nb)));
}

template <class T>
void cosine_backward(const std::vector<T>& a, const std::vector<T>& b, double d_sim,
                     std::vector<T>& d_a, std::vector<T>& d_b) {
    T dot = T(0), na2 = T(0), nb2 = T(0);
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na2 += a[i] * a[i];
        nb2 += b[i] * b[i];
    }
    if (na2 == T(0) || nb2 == T(0)) return;  // similarity pinned to 0
    const T na = std::sqrt(na2);
    const T nb = std::sqrt(nb2);
    const T inv = T(1) / (na * nb);
    const T sim = dot * inv;
    const T g = static_cast<T>(d_sim);
    for (size_t i = 0; i < a.size(); ++i) {
        d_a[i] += g * (b[i] * inv - sim * a[i] / na2);
        d_b[i] += g * (a[i] * inv - sim * b[i] / nb2);
    }
}

namespace detail {

StepPlan plan_from_probs(const std::vector<double>& probs, const Document& doc,
                         const Reference& reference, const Labels& labels,
                         const CandidateConfig& config, const RougeWeights& weights);

template <class T>
nn::Matrix<T> gather_rows(const nn::Matrix<T>& source, const std::vector<int>& indices) {
    nn::Matrix<T> out(static_cast<int>(indices.size()), source.cols);
    for (size_t i = 0; i < indices.size(); ++i) {
        const T* src = source.row(indices[i]);
        std::copy(src, src + source.cols, out.row(static_cast<int>(i)));
    }
    return out;
}

}  // namespace detail

template <class T>
StepPlan make_step_plan(const ModelParams<T>& params, const Document& doc,
                        const Reference& reference, const Labels& labels,
                        const CandidateConfig& config, const RougeWeights& weights) {
    EncodeCache<T> enc;
    encode_edus(params, doc, enc);
    ProbCache<T> probs;
    predict_probs(params, enc.edu_vectors, probs);
    return detail::plan_from_probs(probs.probs, doc, reference, labels, config, weights);
}

template <class T>
void forward_pass(const ModelParams<T>& params, const Document& doc, const Labels& labels,
                  const StepPlan& plan, const LossConfig& cfg, ForwardState<T>& state) {
    encode_edus(params, doc, state.enc);
    predict_probs(params, state.enc.edu_vectors, state.probs);
    encode_representation(params, state.enc.edu_vectors, state.doc_pool);

    state.cand_pools.assign(plan.candidates.size(), PoolCache<T>());
    state.sims.assign(plan.candidates.size(), 0.0);
    for (size_t s = 0; s < plan.candidates.size(); ++s) {
        encode_representation(params,
                              detail::gather_rows(state.enc.edu_vectors, plan.candidates[s].indices),
                              state.cand_pools[s]);
        state.sims[s] = cosine_sim(state.doc_pool.pooled, state.cand_pools[s].pooled);
    }
    encode_representation(params, detail::gather_rows(state.enc.edu_vectors, plan.gt_indices),
                          state.gt_pool);
    state.sim_gt = cosine_sim(state.doc_pool.pooled, state.gt_pool.pooled);

    const double bce = bce_loss(state.probs.probs, labels);
    const ContrastiveTerms con = contrastive_loss(state.sims, state.sim_gt, cfg);
    state.loss = total_loss(bce, con, cfg.rho);
}

template <class T>
LossBreakdown loss_with_plan(const ModelParams<T>& params, const Document& doc,
                             const Labels& labels, const StepPlan& plan, const LossConfig& cfg) {
    ForwardState<T> state;
    forward_pass(params, doc, labels, plan, cfg, state);
    return state.loss;
}

template <class T>
StepResult accumulate_gradients(ModelParams<T>& params, const Document& doc,
                                const Reference& reference, const Labels& labels,
                                const CandidateConfig& config, const LossConfig& cfg,
                                const RougeWeights& weights) {
    if (labels.positive_indices().empty())
        throw InputError("train step: document '" + doc.doc_id + "' has no positive labels");

    ForwardState<T> state;
    encode_edus(params, doc, state.enc);
    predict_probs(params, state.enc.edu_vectors, state.probs);
    StepPlan plan =
        detail::plan_from_probs(state.probs.probs, doc, reference, labels, config, weights);

    encode_representation(params, state.enc.edu_vectors, state.doc_pool);
    state.cand_pools.assign(plan.candidates.size(), PoolCache<T>());
    state.sims.assign(plan.candidates.size(), 0.0);
    for (size_t s = 0; s < plan.candidates.size(); ++s) {
        encode_representation(params,
                              detail::gather_rows(state.enc.edu_vectors, plan.candidates[s].indices),
                              state.cand_pools[s]);
        state.sims[s] = cosine_sim(state.doc_pool.pooled, state.cand_pools[s].pooled);
    }
    encode_representation(params, detail::gather_rows(state.enc.edu_vectors, plan.gt_indices),
                          state.gt_pool);
    state.sim_gt = cosine_sim(state.doc_pool.pooled, state.gt_pool.pooled);

    const double bce = bce_loss(state.probs.probs, labels);
    const ContrastiveTerms con = contrastive_loss(state.sims, state.sim_gt, cfg);
    state.loss = total_loss(bce, con, cfg.rho);
    if (!std::isfinite(state.loss.total))
        throw NumericError("non-finite training loss on document '" + doc.doc_id + "'");

    // Hinge subgradients, scaled by rho.
    const size_t c = state.sims.size();
    std::vector<double> d_sims(c, 0.0);
    double d_sim_gt = 0.0;
    for (size_t s = 0; s < c; ++s) {
        if (state.sims[s] - state.sim_gt + cfg.gamma1 > 0.0) {
            d_sims[s] += cfg.rho;
            d_sim_gt -= cfg.rho;
        }
    }
    for (size_t i = 0; i < c; ++i) {
        for (size_t j = i + 1; j < c; ++j) {
            const double margin = static_cast<double>(j - i) * cfg.gamma2;
            if (state.sims[j] - state.sims[i] + margin > 0.0) {
                d_sims[j] += cfg.rho;
                d_sims[i] -= cfg.rho;
            }
        }
    }

    const int m = state.enc.edu_vectors.rows;
    const int d = state.enc.edu_vectors.cols;
    nn::Matrix<T> d_edu(m, d);
    std::vector<T> d_doc_pooled(static_cast<size_t>(d), T(0));

    auto backprop_pool = [&](const PoolCache<T>& pool, const std::vector<int>& indices,
                             double d_sim) {
        std::vector<T> d_pooled(static_cast<size_t>(d), T(0));
        cosine_backward(state.doc_pool.pooled, pool.pooled, d_sim, d_doc_pooled, d_pooled);
        nn::Matrix<T> d_input;
        encode_representation_backward(params, pool, d_pooled, d_input);
        for (size_t i = 0; i < indices.size(); ++i) {
            T* dst = d_edu.row(indices[i]);
            const T* src = d_input.row(static_cast<int>(i));
            for (int j = 0; j < d; ++j) dst[j] += src[j];
        }
    };
    for (size_t s = 0; s < c; ++s)
        backprop_pool(state.cand_pools[s], plan.candidates[s].indices, d_sims[s]);
    backprop_pool(state.gt_pool, plan.gt_indices, d_sim_gt);

    {
        nn::Matrix<T> d_input;
        encode_representation_backward(params, state.doc_pool, d_doc_pooled, d_input);
        for (int i = 0; i < m; ++i) {
            T* dst = d_edu.row(i);
            const T* src = d_input.row(i);
            for (int j = 0; j < d; ++j) dst[j] += src[j];
        }
    }

    // Classifier and its path into the EDU vectors.
    const T* w = params.cls_w.w.row(0);
    T* w_grad = params.cls_w.g.row(0);
    for (int i = 0; i < m; ++i) {
        const double d_logit =
            state.probs.probs[static_cast<size_t>(i)] -
            static_cast<double>(labels.values[static_cast<size_t>(i)]);
        const T g = static_cast<T>(d_logit);
        const T* v = state.enc.edu_vectors.row(i);
        T* dst = d_edu.row(i);
        for (int j = 0; j < d; ++j) {
            w_grad[j] += g * v[j];
            dst[j] += g * w[j];
        }
        params.cls_b.g.at(0, 0) += g;
    }

    encode_edus_backward(params, state.enc, d_edu);

    for (const auto& ref : params.param_refs()) {
        for (const T& g : ref.param->g.a) {
            if (!std::isfinite(static_cast<double>(g)))
                throw NumericError("non-finite gradient in tensor '" + ref.name +
                                   "' on document '" + doc.doc_id + "'");
        }
    }

    StepResult result;
    result.loss = state.loss;
    result.sims = state.sims;
    result.sim_gt = state.sim_gt;
    for (const auto& cand : plan.candidates) result.target_scores.push_back(cand.target_score);
    return result;
}

template <class T>
StepResult train_step(ModelParams<T>& params, const Document& doc, const Reference& reference,
                      const Labels& labels, const CandidateConfig& config, const LossConfig& cfg,
                      const RougeWeights& weights, nn::Adam<T>& optimizer) {
    params.zero_grads();
    StepResult result =
        accumulate_gradients(params, doc, reference, labels, config, cfg, weights);
    auto refs = params.param_refs();
    optimizer.step(refs);
    return result;
}

template <class T>
SummaryOutput summarize(const ModelParams<T>& params, const Document& doc,
                        const CandidateConfig& config, bool trigram_blocking) {
    EncodeCache<T> enc;
    encode_edus(params, doc, enc);
    ProbCache<T> probs;
    predict_probs(params, enc.edu_vectors, probs);

    const std::vector<int> lengths = config.lengths(enc.edu_vectors.rows);
    const std::vector<std::vector<int>> sets =
        trigram_blocking ? generate_candidates_blocked(probs.probs, config, doc)
                         : generate_candidates(probs.probs, config);

    PoolCache<T> doc_pool;
    encode_representation(params, enc.edu_vectors, doc_pool);

    SummaryOutput best;
    bool have_best = false;
    std::vector<int> previous;
    for (size_t s = 0; s < sets.size(); ++s) {
        if (s > 0 && sets[s] == previous) continue;  // blocked walk exhausted early
        previous = sets[s];
        PoolCache<T> pool;
        encode_representation(params, detail::gather_rows(enc.edu_vectors, sets[s]), pool);
        const double sim = cosine_sim(doc_pool.pooled, pool.pooled);
        if (!have_best || sim > best.similarity) {
            have_best = true;
            best.similarity = sim;
            best.indices = sets[s];
            best.chosen_k = lengths[s];
        }
    }

    TokenList tokens;
    for (int idx : best.indices) {
        const Edu& edu = doc.edu(idx);
        tokens.insert(tokens.end(), edu.tokens.begin(), edu.tokens.end());
    }
    best.text = join_text(tokens);
    return best;
}

template <class T>
EvalReport evaluate(const ModelParams<T>& params, const Corpus& corpus,
                    const CandidateConfig& config, bool trigram_blocking, int threads) {
    if (corpus.entries.empty()) throw InputError("evaluate: empty corpus");
    const size_t n = corpus.entries.size();
    std::vector<DocEval> docs(n);

    auto run_doc = [&](size_t i) {
        const auto& entry = corpus.entries[i];
        SummaryOutput summary = summarize(params, entry.document, config, trigram_blocking);
        TokenList tokens;
        for (int idx : summary.indices) {
            const Edu& edu = entry.document.edu(idx);
            tokens.insert(tokens.end(), edu.tokens.begin(), edu.tokens.end());
        }
        DocEval& doc_eval = docs[i];
        doc_eval.doc_id = entry.document.doc_id;
        doc_eval.chosen_k = summary.chosen_k;
        doc_eval.r1 = rouge_n(entry.reference.tokens, tokens, 1);
        doc_eval.r2 = rouge_n(entry.reference.tokens, tokens, 2);
        doc_eval.rl = rouge_l(entry.reference.tokens, tokens);
        doc_eval.summary = std::move(summary);
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

    EvalReport report;
    report.mean_r1.variant = RougeVariant::R1;
    report.mean_r2.variant = RougeVariant::R2;
    report.mean_rl.variant = RougeVariant::RL;
    for (const auto& doc_eval : docs) {
        auto add = [](RougeScore& mean, const RougeScore& s) {
            mean.recall += s.recall;
            mean.precision += s.precision;
            mean.f1 += s.f1;
        };
        add(report.mean_r1, doc_eval.r1);
        add(report.mean_r2, doc_eval.r2);
        add(report.mean_rl, doc_eval.rl);
        ++report.k_histogram[doc_eval.chosen_k];
    }
    for (RougeScore* mean : {&report.mean_r1, &report.mean_r2, &report.mean_rl}) {
        mean->recall /= static_cast<double>(n);
        mean->precision /= static_cast<double>(n);
        mean->f1 /= static_cast<double>(n);
    }
    report.docs = std::move(docs);
    return report;
}

}  // namespace eduvl
