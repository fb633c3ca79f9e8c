#include "kge/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "kge/evaluation.hpp"

namespace kge {

namespace {

double softplus(double x) {
    // log(1 + e^x) without overflow
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

void require_finite(std::span<const double> values, const char* what) {
    for (double v : values)
        if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": nonfinite score");
}

}  // namespace

LossKind parse_loss_kind(const std::string& name) {
    if (name == "nll" || name == "multiclass_nll") return LossKind::MulticlassNLL;
    if (name == "bce") return LossKind::BCE;
    throw std::invalid_argument("unknown loss: " + name);
}

OptimizerKind parse_optimizer_kind(const std::string& name) {
    if (name == "adam") return OptimizerKind::Adam;
    if (name == "sgd") return OptimizerKind::SGD;
    throw std::invalid_argument("unknown optimizer: " + name);
}

RegKind parse_reg_kind(const std::string& name) {
    if (name == "none") return RegKind::None;
    if (name == "l1") return RegKind::L1;
    if (name == "l2") return RegKind::L2;
    if (name == "l3") return RegKind::L3;
    throw std::invalid_argument("unknown regularizer: " + name);
}

void TrainConfig::validate() const {
    if (dim < 1) throw std::invalid_argument("config: dim must be >= 1");
    if (!(lr > 0.0)) throw std::invalid_argument("config: lr must be > 0");
    if (reg_lambda < 0.0) throw std::invalid_argument("config: reg_lambda must be >= 0");
    if (negatives < 1) throw std::invalid_argument("config: negatives must be >= 1");
    if (epochs < 0) throw std::invalid_argument("config: epochs must be >= 0");
    if (batch < 1) throw std::invalid_argument("config: batch must be >= 1");
}

void apply_config_pair(TrainConfig& cfg, std::string_view key, std::string_view value) {
    std::string k(key), v(value);
    if (k == "model") cfg.kind = parse_model_kind(v);
    else if (k == "dim") cfg.dim = std::stoi(v);
    else if (k == "loss") cfg.loss = parse_loss_kind(v);
    else if (k == "optimizer") cfg.optimizer = parse_optimizer_kind(v);
    else if (k == "lr") cfg.lr = std::stod(v);
    else if (k == "reg") cfg.reg = parse_reg_kind(v);
    else if (k == "reg_lambda") cfg.reg_lambda = std::stod(v);
    else if (k == "negatives") cfg.negatives = std::stoi(v);
    else if (k == "epochs") cfg.epochs = std::stoi(v);
    else if (k == "batch") cfg.batch = std::stoi(v);
    else if (k == "seed") cfg.seed = std::stoull(v);
    else throw std::invalid_argument("unknown config key: " + k);
}

namespace {

void apply_config_line(TrainConfig& cfg, std::string_view line) {
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    std::string text(line);
    for (char& c : text)
        if (c == ',') c = ' ';
    std::istringstream tokens(text);
    std::string token;
    while (tokens >> token) {
        auto eq = token.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: expected key=value, got '" + token + "'");
        apply_config_pair(cfg, std::string_view(token).substr(0, eq),
                          std::string_view(token).substr(eq + 1));
    }
}

}  // namespace

TrainConfig parse_config_file(const std::string& path, TrainConfig base) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    while (std::getline(in, line)) apply_config_line(base, line);
    return base;
}

std::vector<TrainConfig> parse_grid_file(const std::string& path, TrainConfig base) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<TrainConfig> grid;
    std::string line;
    while (std::getline(in, line)) {
        std::string_view sv = trim(line);
        if (auto hash = sv.find('#'); hash != std::string_view::npos) sv = trim(sv.substr(0, hash));
        if (sv.empty()) continue;
        TrainConfig cfg = base;
        apply_config_line(cfg, sv);
        grid.push_back(cfg);
    }
    if (grid.empty()) throw std::runtime_error(path + ": empty grid");
    return grid;
}

std::string config_to_string(const TrainConfig& cfg) {
    std::ostringstream out;
    out << "model=" << model_kind_name(cfg.kind) << " dim=" << cfg.dim << " loss="
        << (cfg.loss == LossKind::MulticlassNLL ? "nll" : "bce") << " optimizer="
        << (cfg.optimizer == OptimizerKind::Adam ? "adam" : "sgd") << " lr=" << cfg.lr << " reg=";
    switch (cfg.reg) {
        case RegKind::None: out << "none"; break;
        case RegKind::L1: out << "l1"; break;
        case RegKind::L2: out << "l2"; break;
        case RegKind::L3: out << "l3"; break;
    }
    out << " reg_lambda=" << cfg.reg_lambda << " negatives=" << cfg.negatives
        << " epochs=" << cfg.epochs << " batch=" << cfg.batch << " seed=" << cfg.seed;
    return out.str();
}

std::vector<Negative> sample_negatives(const Triple& positive, int k, int64_t n_entities,
                                       const FilterIndex* filter, Rng& rng) {
    if (k < 1) throw std::invalid_argument("sample_negatives: k must be >= 1");
    if (n_entities < 2) throw std::invalid_argument("sample_negatives: need at least 2 entities");

    std::vector<Negative> negatives;
    negatives.reserve(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
        Negative neg;
        for (int attempt = 0; attempt < 100; ++attempt) {
            bool corrupt_head = uniform_double(rng) < 0.5;
            int32_t original = corrupt_head ? positive.head : positive.tail;
            int32_t candidate;
            do {
                candidate = static_cast<int32_t>(uniform_index(rng, static_cast<std::size_t>(n_entities)));
            } while (candidate == original);
            neg.triple = positive;
            if (corrupt_head)
                neg.triple.head = candidate;
            else
                neg.triple.tail = candidate;
            neg.known_positive = filter != nullptr && filter->contains(neg.triple);
            if (!neg.known_positive) break;
        }
        negatives.push_back(neg);
    }
    return negatives;
}

BceResult loss_bce(std::span<const double> pos_scores, std::span<const double> neg_scores) {
    require_finite(pos_scores, "loss_bce");
    require_finite(neg_scores, "loss_bce");
    const auto n = static_cast<double>(pos_scores.size() + neg_scores.size());
    if (n == 0.0) throw std::invalid_argument("loss_bce: no scores");

    BceResult result;
    result.d_pos.resize(pos_scores.size());
    result.d_neg.resize(neg_scores.size());
    double total = 0.0;
    for (std::size_t i = 0; i < pos_scores.size(); ++i) {
        total += softplus(-pos_scores[i]);  // -log p
        result.d_pos[i] = (sigmoid(pos_scores[i]) - 1.0) / n;
    }
    for (std::size_t i = 0; i < neg_scores.size(); ++i) {
        total += softplus(neg_scores[i]);  // -log(1-p)
        result.d_neg[i] = sigmoid(neg_scores[i]) / n;
    }
    result.loss = total / n;
    return result;
}

NllResult loss_multiclass_nll(double pos_score, std::span<const double> neg_scores) {
    if (!std::isfinite(pos_score)) throw std::invalid_argument("loss_multiclass_nll: nonfinite score");
    require_finite(neg_scores, "loss_multiclass_nll");

    double max_score = pos_score;
    for (double s : neg_scores) max_score = std::max(max_score, s);
    double z = std::exp(pos_score - max_score);
    double denom = z;
    for (double s : neg_scores) denom += std::exp(s - max_score);

    NllResult result;
    result.loss = -pos_score + max_score + std::log(denom);
    result.d_pos = z / denom - 1.0;
    result.d_neg.resize(neg_scores.size());
    for (std::size_t i = 0; i < neg_scores.size(); ++i)
        result.d_neg[i] = std::exp(neg_scores[i] - max_score) / denom;
    return result;
}

double reg_penalty(std::span<const double> row, RegKind mode, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("reg_penalty: lambda must be >= 0");
    double acc = 0.0;
    switch (mode) {
        case RegKind::None: return 0.0;
        case RegKind::L1:
            for (double w : row) acc += std::abs(w);
            break;
        case RegKind::L2:
            for (double w : row) acc += w * w;
            break;
        case RegKind::L3:
            for (double w : row) acc += std::abs(w) * w * w;
            break;
    }
    return lambda * acc;
}

void reg_gradient(std::span<const double> row, RegKind mode, double lambda,
                  std::span<double> grad) {
    if (grad.size() != row.size()) throw std::invalid_argument("reg_gradient: size mismatch");
    switch (mode) {
        case RegKind::None: return;
        case RegKind::L1:
            for (std::size_t i = 0; i < row.size(); ++i)
                grad[i] += lambda * (row[i] > 0.0 ? 1.0 : (row[i] < 0.0 ? -1.0 : 0.0));
            return;
        case RegKind::L2:
            for (std::size_t i = 0; i < row.size(); ++i) grad[i] += 2.0 * lambda * row[i];
            return;
        case RegKind::L3:
            for (std::size_t i = 0; i < row.size(); ++i)
                grad[i] += 3.0 * lambda * std::abs(row[i]) * row[i];
            return;
    }
}

void sgd_step(std::span<double> row, std::span<const double> grad, double lr) {
    if (grad.size() != row.size()) throw std::invalid_argument("sgd_step: size mismatch");
    for (std::size_t i = 0; i < row.size(); ++i) row[i] -= lr * grad[i];
}

void adam_step(std::span<double> row, std::span<const double> grad, double lr, AdamState& state) {
    if (grad.size() != row.size()) throw std::invalid_argument("adam_step: size mismatch");
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    if (state.m.empty()) {
        state.m.assign(row.size(), 0.0);
        state.v.assign(row.size(), 0.0);
    }
    if (state.m.size() != row.size()) throw std::invalid_argument("adam_step: state size mismatch");
    ++state.step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < row.size(); ++i) {
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grad[i];
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grad[i] * grad[i];
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        row[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

namespace {

// Per-batch sparse gradient rows keyed by entity/relation id.
class GradientBuffer {
public:
    explicit GradientBuffer(int width) : width_(width) {}

    std::span<double> row(std::unordered_map<int32_t, std::vector<double>>& table, int32_t id) {
        auto& v = table[id];
        if (v.empty()) v.assign(static_cast<std::size_t>(width_), 0.0);
        return v;
    }
    std::span<double> entity_row(int32_t id) { return row(entity_, id); }
    std::span<double> relation_row(int32_t id) { return row(relation_, id); }

    std::vector<int32_t> sorted_ids(const std::unordered_map<int32_t, std::vector<double>>& table) const {
        std::vector<int32_t> ids;
        ids.reserve(table.size());
        for (const auto& [id, g] : table) ids.push_back(id);
        std::sort(ids.begin(), ids.end());
        return ids;
    }

    void clear() {
        entity_.clear();
        relation_.clear();
    }

    std::unordered_map<int32_t, std::vector<double>> entity_;
    std::unordered_map<int32_t, std::vector<double>> relation_;

private:
    int width_;
};

}  // namespace

std::pair<ModelParams, TrainReport> train(const TripleStore& store, const TrainConfig& cfg) {
    cfg.validate();
    if (store.triples.empty()) throw std::invalid_argument("train: empty store");

    ModelParams params = init_params(cfg.kind, cfg.dim, store.n_entities(), store.n_relations(),
                                     cfg.seed);
    TrainReport report;
    report.config = cfg;
    const auto t_start = std::chrono::steady_clock::now();

    if (cfg.epochs == 0) {
        report.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        return {std::move(params), std::move(report)};
    }

    const FilterIndex filter = FilterIndex::build(store);
    Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    Rng negative_rng(cfg.seed ^ 0xbf58476d1ce4e5b9ULL);

    const std::size_t n = store.triples.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    GradientBuffer grads(params.width);
    std::unordered_map<int32_t, AdamState> entity_state, relation_state;
    std::vector<double> neg_scores;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        fisher_yates_shuffle(order, shuffle_rng);
        double epoch_data_loss = 0.0;
        double epoch_penalty = 0.0;
        int n_batches = 0;

        for (std::size_t batch_start = 0; batch_start < n;
             batch_start += static_cast<std::size_t>(cfg.batch)) {
            const std::size_t batch_end =
                std::min(n, batch_start + static_cast<std::size_t>(cfg.batch));
            const auto batch_count = static_cast<double>(batch_end - batch_start);
            grads.clear();
            double batch_loss = 0.0;
            double batch_penalty = 0.0;

            for (std::size_t i = batch_start; i < batch_end; ++i) {
                const Triple& pos = store.triples[order[i]];
                auto negatives = sample_negatives(pos, cfg.negatives, params.n_entities, &filter,
                                                  negative_rng);
                const double pos_score = score(params, pos);
                neg_scores.resize(negatives.size());
                for (std::size_t j = 0; j < negatives.size(); ++j)
                    neg_scores[j] = score(params, negatives[j].triple);
                if (!std::isfinite(pos_score)) throw DivergenceError(epoch, n_batches);
                for (double s : neg_scores)
                    if (!std::isfinite(s)) throw DivergenceError(epoch, n_batches);

                double d_pos;
                std::vector<double> d_neg;
                if (cfg.loss == LossKind::MulticlassNLL) {
                    auto r = loss_multiclass_nll(pos_score, neg_scores);
                    batch_loss += r.loss;
                    d_pos = r.d_pos;
                    d_neg = std::move(r.d_neg);
                } else {
                    const double one[] = {pos_score};
                    auto r = loss_bce(one, neg_scores);
                    batch_loss += r.loss;
                    d_pos = r.d_pos[0];
                    d_neg = std::move(r.d_neg);
                }

                const double scale = 1.0 / batch_count;
                accumulate_score_gradient(params, pos, d_pos * scale, grads.entity_row(pos.head),
                                          grads.relation_row(pos.relation),
                                          grads.entity_row(pos.tail));
                for (std::size_t j = 0; j < negatives.size(); ++j) {
                    const Triple& t = negatives[j].triple;
                    accumulate_score_gradient(params, t, d_neg[j] * scale, grads.entity_row(t.head),
                                              grads.relation_row(t.relation),
                                              grads.entity_row(t.tail));
                }

                // Stochastic regularization: each example penalizes its own
                // three rows with the same 1/batch weight as its loss.
                if (cfg.reg != RegKind::None) {
                    batch_penalty += reg_penalty(params.entity_row(pos.head), cfg.reg,
                                                 cfg.reg_lambda) +
                                     reg_penalty(params.relation_row(pos.relation), cfg.reg,
                                                 cfg.reg_lambda) +
                                     reg_penalty(params.entity_row(pos.tail), cfg.reg,
                                                 cfg.reg_lambda);
                    const double lambda_scaled = cfg.reg_lambda * scale;
                    reg_gradient(params.entity_row(pos.head), cfg.reg, lambda_scaled,
                                 grads.entity_row(pos.head));
                    reg_gradient(params.relation_row(pos.relation), cfg.reg, lambda_scaled,
                                 grads.relation_row(pos.relation));
                    reg_gradient(params.entity_row(pos.tail), cfg.reg, lambda_scaled,
                                 grads.entity_row(pos.tail));
                }
            }

            auto entity_ids = grads.sorted_ids(grads.entity_);
            auto relation_ids = grads.sorted_ids(grads.relation_);

            const double batch_objective = (batch_loss + batch_penalty) / batch_count;
            if (!std::isfinite(batch_objective)) throw DivergenceError(epoch, n_batches);

            if (cfg.optimizer == OptimizerKind::SGD) {
                for (int32_t id : entity_ids)
                    sgd_step(params.entity_row(id), grads.entity_[id], cfg.lr);
                for (int32_t id : relation_ids)
                    sgd_step(params.relation_row(id), grads.relation_[id], cfg.lr);
            } else {
                for (int32_t id : entity_ids)
                    adam_step(params.entity_row(id), grads.entity_[id], cfg.lr, entity_state[id]);
                for (int32_t id : relation_ids)
                    adam_step(params.relation_row(id), grads.relation_[id], cfg.lr,
                              relation_state[id]);
            }

            epoch_data_loss += batch_loss;
            epoch_penalty += batch_penalty;
            ++n_batches;
        }

        const double mean_loss = (epoch_data_loss + epoch_penalty) / static_cast<double>(n);
        if (!std::isfinite(mean_loss)) throw DivergenceError(epoch, n_batches);
        report.epoch_loss.push_back(mean_loss);
    }

    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return {std::move(params), std::move(report)};
}

Metric parse_metric(const std::string& name) {
    Metric metric;
    if (name == "mrr") {
        metric.kind = Metric::Kind::MRR;
        return metric;
    }
    if (name.rfind("hits@", 0) == 0) {
        metric.kind = Metric::Kind::Hits;
        metric.n = std::stoi(name.substr(5));
        if (metric.n < 1) throw std::invalid_argument("metric: hits level must be >= 1");
        return metric;
    }
    throw std::invalid_argument("unknown metric: " + name);
}

std::string metric_name(const Metric& metric) {
    if (metric.kind == Metric::Kind::MRR) return "mrr";
    return "hits@" + std::to_string(metric.n);
}

std::vector<GridResult> grid_search(const TripleStore& train_store,
                                    const std::vector<TrainConfig>& grid, const Metric& metric,
                                    const TripleStore& test_store) {
    if (grid.empty()) throw std::invalid_argument("grid_search: empty grid");
    if (!same_dictionaries(train_store, test_store))
        throw std::runtime_error("grid_search: train/test stores do not share dictionaries");

    const TripleStore* stores[] = {&train_store, &test_store};
    const FilterIndex filter = FilterIndex::build(std::span<const TripleStore* const>(stores, 2));

    std::vector<int> hits_levels = {1, 3, 10};
    if (metric.kind == Metric::Kind::Hits &&
        std::find(hits_levels.begin(), hits_levels.end(), metric.n) == hits_levels.end())
        hits_levels.push_back(metric.n);

    std::vector<GridResult> results;
    results.reserve(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        GridResult row;
        row.config = grid[i];
        row.config_index = i;
        try {
            auto [params, train_report] = train(train_store, grid[i]);
            RankReport report = evaluate(params, test_store, &filter, Protocol::Filtered,
                                         hits_levels);
            row.mrr = report.mrr(Side::Both);
            row.hits1 = report.hits(1, Side::Both);
            row.hits3 = report.hits(3, Side::Both);
            row.hits10 = report.hits(10, Side::Both);
            row.metric_value = metric.kind == Metric::Kind::MRR
                                   ? row.mrr
                                   : report.hits(metric.n, Side::Both);
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
            row.metric_value = -std::numeric_limits<double>::infinity();
        }
        results.push_back(std::move(row));
    }

    std::stable_sort(results.begin(), results.end(), [](const GridResult& a, const GridResult& b) {
        if (a.failed != b.failed) return !a.failed;
        return a.metric_value > b.metric_value;
    });
    return results;
}

}  // namespace kge
