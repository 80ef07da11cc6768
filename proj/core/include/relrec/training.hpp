#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "relrec/config.hpp"
#include "relrec/dataset.hpp"
#include "relrec/eval.hpp"
#include "relrec/graph.hpp"
#include "relrec/params.hpp"
#include "relrec/rationale.hpp"

namespace relrec {

struct BceResult {
    double loss = 0;
    std::vector<double> dlogits;  // p_i − y_i
};

/// −Σ [y ln p + (1−y) ln(1−p)] with p clamped to [1e-12, 1 − 1e-12].
BceResult bce_loss(std::span<const double> probabilities, std::span<const int> labels);

/// L_p over a batch of labelled pairs, accumulating gradients when `grads` is non-null.
double prediction_loss(const ModelParams& params, std::span<const LabeledPair> batch,
                       const PredictOptions& opts, GradSet* grads = nullptr);

/// Endless sampler over a fixed item list: shuffles, hands out items in order and
/// reshuffles whenever the list is exhausted.
template <typename T>
class CyclicSampler {
public:
    CyclicSampler(std::vector<T> items, std::uint64_t seed) : items_(std::move(items)), rng_(seed) {
        std::shuffle(items_.begin(), items_.end(), rng_);
    }

    std::vector<T> next(std::size_t n) {
        std::vector<T> out;
        if (items_.empty()) return out;
        out.reserve(n);
        while (out.size() < n) {
            if (pos_ == items_.size()) {
                std::shuffle(items_.begin(), items_.end(), rng_);
                pos_ = 0;
            }
            out.push_back(items_[pos_++]);
        }
        return out;
    }

private:
    std::vector<T> items_;
    std::mt19937_64 rng_;
    std::size_t pos_ = 0;
};

/// Seed of an independent stream derived from a base seed (splitmix64 finaliser).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

struct EpochLog {
    std::size_t epoch = 0;
    double recall_loss = 0;      // mean per entity
    double relational_loss = 0;  // mean per triple
    double prediction_loss = 0;  // mean per pair
    double dev_precision = 0;
    double dev_recall = 0;
    double dev_f1 = 0;
    double wall_seconds = 0;
};

void write_training_log(std::span<const EpochLog> log, std::ostream& out);

/// Copy of `triples` without (head, relation, tail) for any of `pairs`. Keeps evaluation
/// labels out of the relational training set.
TripleSet without_pairs(const TripleSet& triples, std::span<const LabeledPair> pairs);

struct TrainingData {
    const CoocGraph* graph = nullptr;
    const PpmiMatrix* ppmi = nullptr;
    TripleSet triples;  // forward gold triples; reverse rows are added internally
    std::vector<LabeledPair> train;
    std::vector<LabeledPair> dev;
    std::size_t n_rel = 0;
};

enum class Stage { recall, relational, prediction };

struct TrainResult {
    ModelParams params;  // parameters of the best dev-F1 epoch
    AdamState adam;
    std::vector<EpochLog> log;
    std::size_t best_epoch = 0;
    double best_dev_f1 = 0;
    bool stopped_early = false;
};

struct TrainHooks {
    /// Called after every optimizer step with the stage that produced it.
    std::function<void(Stage, const ModelParams&)> after_step;
    /// Called after each epoch's log line is complete.
    std::function<void(const EpochLog&)> after_epoch;
};

/// Joint optimisation of L_n, L_r and L_p with early stopping on dev F1.
/// One epoch is one pass over `data.train` in stage (c); stages (a) and (b) take the
/// same number of steps. Dev pairs are removed from the triples first. With the
/// prediction stage off there is no dev evaluation and the last epoch is returned.
/// Throws DivergenceError on a non-finite loss.
TrainResult joint_train(const TrainingData& data, const TrainConfig& config,
                        const TrainHooks& hooks = {});

/// Predicted probabilities for each pair (optionally on several threads; results do not
/// depend on the thread count).
std::vector<double> predict_pairs(const ModelParams& params, std::span<const LabeledPair> pairs,
                                  const PredictOptions& opts, unsigned threads = 1);

enum class LossKind { recall, relational, prediction };

std::string_view to_string(LossKind kind);

struct GradCheckInstance {
    std::size_t vocab_size = 12;
    std::size_t d = 4;
    std::size_t n_rel = 3;
    std::size_t n_h = 2;
    std::size_t n_t = 2;
    std::size_t n_neg = 5;
    std::size_t n_triples = 8;
    std::size_t n_pairs = 4;
    double scale = 0.5;  // standard deviation of the random parameters
    std::uint64_t seed = 7;
    bool zero_loss = false;  // all-zero parameters, balanced labels: every gradient vanishes
};

struct TensorCheck {
    std::string tensor;
    double max_rel_error = 0;
    double max_abs_error = 0;
    bool pass = true;
};

struct GradCheckReport {
    LossKind loss = LossKind::recall;
    std::vector<TensorCheck> tensors;
    bool pass = true;
    double seconds = 0;
};

struct GradCheckOptions {
    double step = 1e-5;
    double tolerance = 1e-4;
    /// Applied to the analytic gradients before comparison; lets tests corrupt them.
    std::function<void(GradSet&)> tamper;
};

/// Central finite differences against the analytic gradient of one loss, for every
/// entry of every tensor. Relative error is |a − n| / max(|a|, |n|, 1e-6).
GradCheckReport grad_check(LossKind loss, const GradCheckInstance& instance,
                           const GradCheckOptions& opts = {});

}  // namespace relrec
