#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kge/common.hpp"
#include "kge/model.hpp"
#include "kge/triple_store.hpp"

namespace kge {

enum class LossKind { MulticlassNLL, BCE };
enum class OptimizerKind { Adam, SGD };
enum class RegKind { None, L1, L2, L3 };

LossKind parse_loss_kind(const std::string& name);
OptimizerKind parse_optimizer_kind(const std::string& name);
RegKind parse_reg_kind(const std::string& name);

struct TrainConfig {
    ModelKind kind = ModelKind::ComplEx;
    int dim = 100;
    LossKind loss = LossKind::MulticlassNLL;
    OptimizerKind optimizer = OptimizerKind::Adam;
    double lr = 1e-3;
    RegKind reg = RegKind::None;
    double reg_lambda = 0.0;
    int negatives = 10;
    int epochs = 200;
    int batch = 512;
    uint64_t seed = 42;

    void validate() const;
};

// Flat key=value syntax: model, dim, loss, optimizer, lr, reg, reg_lambda,
// negatives, epochs, batch, seed. '#' starts a comment.
void apply_config_pair(TrainConfig& cfg, std::string_view key, std::string_view value);
TrainConfig parse_config_file(const std::string& path, TrainConfig base = {});
std::vector<TrainConfig> parse_grid_file(const std::string& path, TrainConfig base = {});
std::string config_to_string(const TrainConfig& cfg);

struct TrainReport {
    std::vector<double> epoch_loss;  // data term + batch-mean regularizer penalty
    double wall_seconds = 0.0;
    TrainConfig config;
};

struct DivergenceError : std::runtime_error {
    DivergenceError(int epoch, int batch)
        : std::runtime_error("training diverged (nonfinite loss) at epoch " +
                             std::to_string(epoch) + ", batch " + std::to_string(batch)),
          epoch(epoch),
          batch(batch) {}
    int epoch;
    int batch;
};

struct Negative {
    Triple triple;
    bool known_positive = false;  // kept despite being in the filter (resampling exhausted)
};

// Corrupts head or tail (coin flip) with a uniform entity different from the
// original. Corruptions found in the filter are resampled up to 100 times.
std::vector<Negative> sample_negatives(const Triple& positive, int k, int64_t n_entities,
                                       const FilterIndex* filter, Rng& rng);

struct BceResult {
    double loss = 0.0;
    std::vector<double> d_pos;  // d loss / d pos_scores[i]
    std::vector<double> d_neg;
};

// Eq-style binary cross entropy on expit(score) with targets 1/0, averaged
// over all N = |pos| + |neg| terms. Gradients use the stable logit form.
BceResult loss_bce(std::span<const double> pos_scores, std::span<const double> neg_scores);

struct NllResult {
    double loss = 0.0;
    double d_pos = 0.0;
    std::vector<double> d_neg;
};

// Softmax cross entropy of the positive against its sampled negatives:
// loss = -pos + logsumexp({pos} u negs).
NllResult loss_multiclass_nll(double pos_score, std::span<const double> neg_scores);

double reg_penalty(std::span<const double> row, RegKind mode, double lambda);
// Adds the penalty gradient into grad.
void reg_gradient(std::span<const double> row, RegKind mode, double lambda,
                  std::span<double> grad);

// w <- w - lr * g
void sgd_step(std::span<double> row, std::span<const double> grad, double lr);

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    int64_t step = 0;
};

// Standard Adam recursion, beta1=0.9 beta2=0.999 eps=1e-8, bias corrected,
// with the step count kept per row.
void adam_step(std::span<double> row, std::span<const double> grad, double lr, AdamState& state);

std::pair<ModelParams, TrainReport> train(const TripleStore& store, const TrainConfig& cfg);

struct Metric {
    enum class Kind { MRR, Hits };
    Kind kind = Kind::MRR;
    int n = 10;  // Hits level
};

Metric parse_metric(const std::string& name);
std::string metric_name(const Metric& metric);

struct GridResult {
    TrainConfig config;
    std::size_t config_index = 0;
    bool failed = false;
    std::string error;
    double metric_value = 0.0;
    double mrr = 0.0;
    double hits1 = 0.0;
    double hits3 = 0.0;
    double hits10 = 0.0;
};

// Trains and evaluates every config (filtered protocol, both sides), sorted
// descending by the chosen metric; failed cells sort last and stay marked.
std::vector<GridResult> grid_search(const TripleStore& train_store,
                                    const std::vector<TrainConfig>& grid, const Metric& metric,
                                    const TripleStore& test_store);

}  // namespace kge
