#include "relrec/training.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <spdlog/spdlog.h>

#include "relrec/errors.hpp"
#include "relrec/recall.hpp"
#include "relrec/relational.hpp"

namespace relrec {

void TrainConfig::validate() const {
    if (d == 0 || b1 == 0 || b2 == 0 || b3 == 0 || n_neg == 0 || n_c == 0 || top_k == 0)
        throw DataError("sizes in the training configuration must be positive");
    if (patience == 0) throw DataError("patience must be at least 1");
    if (max_epochs == 0) throw DataError("max_epochs must be at least 1");
    if (!(lr > 0) || !std::isfinite(lr)) throw DataError("learning rate must be positive");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
        throw DataError("Adam betas must lie in [0, 1)");
    if (!(eps > 0)) throw DataError("Adam epsilon must be positive");
    if (!(threshold > 0 && threshold < 1)) throw DataError("threshold must lie in (0, 1)");
}

BceResult bce_loss(std::span<const double> probabilities, std::span<const int> labels) {
    if (probabilities.size() != labels.size())
        throw DataError("probabilities and labels differ in length");
    BceResult r;
    r.dlogits.reserve(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double p = std::clamp(probabilities[i], 1e-12, 1.0 - 1e-12);
        const int y = labels[i];
        r.loss -= y ? std::log(p) : std::log1p(-p);
        r.dlogits.push_back(probabilities[i] - y);
    }
    return r;
}

double prediction_loss(const ModelParams& params, std::span<const LabeledPair> batch,
                       const PredictOptions& opts, GradSet* grads) {
    std::vector<Prediction> preds;
    std::vector<double> probs;
    std::vector<int> labels;
    preds.reserve(batch.size());
    for (const auto& p : batch) {
        preds.push_back(predict_relation(params, p.head, p.tail, opts));
        probs.push_back(preds.back().probability);
        labels.push_back(p.label);
    }
    const auto bce = bce_loss(probs, labels);
    if (grads)
        for (std::size_t i = 0; i < preds.size(); ++i)
            backprop_prediction(params, preds[i], bce.dlogits[i], opts.posterior, *grads);
    return bce.loss;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t z = base + (stream + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

void write_training_log(std::span<const EpochLog> log, std::ostream& out) {
    out << "epoch,L_n,L_r,L_p,dev_precision,dev_recall,dev_F1,wall_seconds\n";
    for (const auto& e : log)
        fmt::print(out, "{},{},{},{},{},{},{},{:.3f}\n", e.epoch, e.recall_loss, e.relational_loss,
                   e.prediction_loss, e.dev_precision, e.dev_recall, e.dev_f1, e.wall_seconds);
}

TripleSet without_pairs(const TripleSet& triples, std::span<const LabeledPair> pairs) {
    std::set<Triple> drop;
    for (const auto& p : pairs) drop.insert({p.head, p.relation, p.tail});
    TripleSet out;
    for (const auto& t : triples.triples())
        if (!drop.contains(t)) out.add(t);
    return out;
}

namespace {

enum StreamId : std::uint64_t { kInit, kEntities, kTriples, kPairs, kCorruptions };

void check_finite(double loss, std::string_view what, std::size_t epoch) {
    if (!std::isfinite(loss))
        throw DivergenceError(fmt::format("{} became non-finite in epoch {}", what, epoch));
}

}  // namespace

TrainResult joint_train(const TrainingData& data, const TrainConfig& config,
                        const TrainHooks& hooks) {
    config.validate();
    if (!data.graph || !data.ppmi) throw DataError("training needs a graph and its PPMI matrix");
    if (data.graph->vocab.size() == 0) throw DataError("training graph is empty");
    if (data.n_rel == 0) throw DataError("training needs at least one relation");
    if (config.prediction_stage && (data.train.empty() || data.dev.empty()))
        throw DataError("training needs non-empty train and dev pairs");

    const std::size_t vocab_size = data.graph->vocab.size();
    const ModelDims dims = config.dims(data.n_rel);

    const auto empirical = empirical_context_dists(*data.ppmi);
    std::vector<EntityId> eligible;
    for (EntityId e = 0; e < empirical.size(); ++e)
        if (empirical[e]) eligible.push_back(e);
    if (config.recall_stage && eligible.empty())
        throw DataError("no entity has a positive PPMI neighbour");

    const TripleSet kb = without_pairs(data.triples, data.dev);
    const TripleSet augmented = kb.with_reverse(data.n_rel);
    if (config.relational_stage && augmented.empty())
        throw DataError("training needs at least one gold triple");
    const PredictOptions opts = config.predict_options(&kb);

    TrainResult result;
    ModelParams params = init_params(dims, vocab_size, derive_seed(config.seed, kInit));
    AdamState adam(params, config.lr, config.beta1, config.beta2, config.eps);

    CyclicSampler<EntityId> entity_sampler(eligible, derive_seed(config.seed, kEntities));
    CyclicSampler<Triple> triple_sampler(augmented.triples(), derive_seed(config.seed, kTriples));
    CyclicSampler<LabeledPair> pair_sampler(data.train, derive_seed(config.seed, kPairs));
    std::mt19937_64 corruption_rng(derive_seed(config.seed, kCorruptions));

    // Recall-only training keeps the same step count as a full run on these pairs.
    const std::size_t n_train = std::max<std::size_t>(data.train.size(), 1);
    const std::size_t steps = (n_train + config.b3 - 1) / config.b3;

    std::vector<int> dev_labels;
    for (const auto& p : data.dev) dev_labels.push_back(p.label);

    GradSet grads(params);
    std::size_t since_best = 0;
    bool have_best = false;
    const auto start = std::chrono::steady_clock::now();

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        EpochLog entry;
        entry.epoch = epoch;
        std::size_t n_ent = 0, n_tri = 0, n_pair = 0;
        for (std::size_t step = 0; step < steps; ++step) {
            if (config.recall_stage) {
                const auto batch = entity_sampler.next(config.b1);
                grads.clear();
                const double loss = recall_loss(params, empirical, batch, &grads);
                check_finite(loss, "L_n", epoch);
                adam_step(params, grads, adam);
                entry.recall_loss += loss;
                n_ent += batch.size();
                if (hooks.after_step) hooks.after_step(Stage::recall, params);
            }
            if (config.relational_stage) {
                const auto batch = triple_sampler.next(config.b2);
                grads.clear();
                const double loss =
                    relational_loss(params, batch, config.n_neg, corruption_rng(), &grads);
                check_finite(loss, "L_r", epoch);
                adam_step(params, grads, adam);
                entry.relational_loss += loss;
                n_tri += batch.size();
                if (hooks.after_step) hooks.after_step(Stage::relational, params);
            }
            if (config.prediction_stage) {
                const auto batch = pair_sampler.next(std::min(config.b3, data.train.size()));
                grads.clear();
                const double loss = prediction_loss(params, batch, opts, &grads);
                check_finite(loss, "L_p", epoch);
                adam_step(params, grads, adam);
                entry.prediction_loss += loss;
                n_pair += batch.size();
                if (hooks.after_step) hooks.after_step(Stage::prediction, params);
            }
        }
        if (n_ent) entry.recall_loss /= static_cast<double>(n_ent);
        if (n_tri) entry.relational_loss /= static_cast<double>(n_tri);
        if (n_pair) entry.prediction_loss /= static_cast<double>(n_pair);

        bool improved = false;
        if (config.prediction_stage) {
            const auto probs = predict_pairs(params, data.dev, opts);
            const auto m = f1_score(probs, dev_labels, config.threshold);
            entry.dev_precision = m.precision;
            entry.dev_recall = m.recall;
            entry.dev_f1 = m.f1;
            improved = !have_best || m.f1 > result.best_dev_f1;
        } else {
            improved = true;
        }
        entry.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.log.push_back(entry);
        spdlog::info("epoch {}: L_n={:.5f} L_r={:.5f} L_p={:.5f} dev F1={:.4f}", epoch,
                     entry.recall_loss, entry.relational_loss, entry.prediction_loss, entry.dev_f1);
        if (hooks.after_epoch) hooks.after_epoch(entry);

        if (improved) {
            have_best = true;
            since_best = 0;
            result.best_epoch = epoch;
            result.best_dev_f1 = entry.dev_f1;
            result.params = params;
            result.adam = adam;
        } else if (++since_best >= config.patience) {
            result.stopped_early = true;
            spdlog::info("dev F1 has not improved for {} epochs; best epoch {}", config.patience,
                         result.best_epoch);
            break;
        }
    }
    return result;
}

std::vector<double> predict_pairs(const ModelParams& params, std::span<const LabeledPair> pairs,
                                  const PredictOptions& opts, unsigned threads) {
    std::vector<double> out(pairs.size());
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
            out[i] = predict_relation(params, pairs[i].head, pairs[i].tail, opts).probability;
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(pairs.size())));
    if (threads <= 1) {
        work(0, pairs.size());
        return out;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    const std::size_t chunk = (pairs.size() + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        const std::size_t begin = t * chunk, end = std::min(pairs.size(), begin + chunk);
        pool.emplace_back([&, t, begin, end] {
            try {
                work(begin, end);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

std::string_view to_string(LossKind kind) {
    switch (kind) {
        case LossKind::recall: return "L_n";
        case LossKind::relational: return "L_r";
        case LossKind::prediction: return "L_p";
    }
    return "?";
}

namespace {

struct CheckProblem {
    ModelParams params;
    std::vector<std::optional<EmpiricalDist>> empirical;
    std::vector<EntityId> entities;
    std::vector<Triple> triples;
    std::vector<LabeledPair> pairs;
    PredictOptions opts;
    std::size_t n_neg = 0;
    std::uint64_t corruption_seed = 0;
};

CheckProblem make_problem(const GradCheckInstance& inst) {
    CheckProblem pb;
    const ModelDims dims{inst.d, inst.d, inst.d, inst.n_rel};
    pb.params = ModelParams::zeros(dims, inst.vocab_size);
    std::mt19937_64 rng(inst.seed);
    if (!inst.zero_loss) {
        std::normal_distribution<double> normal(0.0, inst.scale);
        for (auto& t : pb.params.tensors)
            for (auto& x : t.flat()) x = normal(rng);
    }

    std::uniform_int_distribution<EntityId> pick(0, static_cast<EntityId>(inst.vocab_size - 1));
    std::uniform_real_distribution<double> weight(0.1, 1.0);
    pb.empirical.resize(inst.vocab_size);
    for (EntityId e = 0; e < inst.vocab_size; ++e) {
        std::set<EntityId> support;
        while (support.size() < 3) {
            const EntityId j = pick(rng);
            if (j != e) support.insert(j);
        }
        EmpiricalDist dist;
        double total = 0;
        for (EntityId j : support) {
            dist.support.emplace_back(j, weight(rng));
            total += dist.support.back().second;
        }
        for (auto& s : dist.support) s.second /= total;
        pb.empirical[e] = std::move(dist);
        pb.entities.push_back(e);
    }

    std::uniform_int_distribution<RelationId> rel(0, static_cast<RelationId>(2 * inst.n_rel - 1));
    for (std::size_t i = 0; i < inst.n_triples; ++i) {
        EntityId h = pick(rng), t = pick(rng);
        while (t == h) t = pick(rng);
        pb.triples.push_back({h, rel(rng), t});
    }
    for (std::size_t i = 0; i < inst.n_pairs; ++i) {
        EntityId h = pick(rng), t = pick(rng);
        while (t == h) t = pick(rng);
        pb.pairs.push_back({h, t, static_cast<int>(i % 2), 0});
    }
    pb.opts.n_h = inst.n_h;
    pb.opts.n_t = inst.n_t;
    pb.n_neg = inst.n_neg;
    pb.corruption_seed = derive_seed(inst.seed, kCorruptions);
    return pb;
}

double evaluate(LossKind kind, const CheckProblem& pb, const ModelParams& params, GradSet* grads) {
    switch (kind) {
        case LossKind::recall: return recall_loss(params, pb.empirical, pb.entities, grads);
        case LossKind::relational:
            return relational_loss(params, pb.triples, pb.n_neg, pb.corruption_seed, grads);
        case LossKind::prediction: return prediction_loss(params, pb.pairs, pb.opts, grads);
    }
    return 0;
}

}  // namespace

GradCheckReport grad_check(LossKind loss, const GradCheckInstance& instance,
                           const GradCheckOptions& opts) {
    const auto start = std::chrono::steady_clock::now();
    const CheckProblem pb = make_problem(instance);
    GradCheckReport report;
    report.loss = loss;

    GradSet analytic(pb.params);
    evaluate(loss, pb, pb.params, &analytic);
    if (opts.tamper) opts.tamper(analytic);

    ModelParams probe = pb.params;
    for (std::size_t ti = 0; ti < kNumTensors; ++ti) {
        TensorCheck check;
        check.tensor = std::string(kTensorNames[ti]);
        auto values = probe.tensors[ti].flat();
        const auto grad = analytic.grads.tensors[ti].flat();
        for (std::size_t k = 0; k < values.size(); ++k) {
            const double saved = values[k];
            values[k] = saved + opts.step;
            const double up = evaluate(loss, pb, probe, nullptr);
            values[k] = saved - opts.step;
            const double down = evaluate(loss, pb, probe, nullptr);
            values[k] = saved;
            const double numeric = (up - down) / (2 * opts.step);
            const double abs_err = std::abs(grad[k] - numeric);
            const double rel_err =
                abs_err / std::max({std::abs(grad[k]), std::abs(numeric), 1e-6});
            check.max_abs_error = std::max(check.max_abs_error, abs_err);
            check.max_rel_error = std::max(check.max_rel_error, rel_err);
        }
        check.pass = check.max_rel_error <= opts.tolerance;
        report.pass = report.pass && check.pass;
        report.tensors.push_back(std::move(check));
    }
    report.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

}  // namespace relrec
