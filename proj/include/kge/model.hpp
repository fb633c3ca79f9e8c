#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "kge/triple_store.hpp"

namespace kge {

enum class ModelKind { TransE_L1, TransE_L2, DistMult, ComplEx, HolE };

ModelKind parse_model_kind(const std::string& name);
std::string model_kind_name(ModelKind kind);

// Row width of the embedding tables: d, or 2d for ComplEx (real part first,
// imaginary part second).
int width_for(ModelKind kind, int dim);

struct ModelParams {
    ModelKind kind = ModelKind::DistMult;
    int32_t dim = 0;
    int32_t width = 0;
    int64_t n_entities = 0;
    int64_t n_relations = 0;
    std::vector<double> entity;    // n_entities x width, row major
    std::vector<double> relation;  // n_relations x width, row major

    std::span<const double> entity_row(int64_t id) const {
        return {entity.data() + id * width, static_cast<std::size_t>(width)};
    }
    std::span<double> entity_row(int64_t id) {
        return {entity.data() + id * width, static_cast<std::size_t>(width)};
    }
    std::span<const double> relation_row(int64_t id) const {
        return {relation.data() + id * width, static_cast<std::size_t>(width)};
    }
    std::span<double> relation_row(int64_t id) {
        return {relation.data() + id * width, static_cast<std::size_t>(width)};
    }
};

// Entries uniform in [-6/sqrt(d), +6/sqrt(d)], deterministic per seed.
ModelParams init_params(ModelKind kind, int dim, int64_t n_entities, int64_t n_relations,
                        uint64_t seed);

// Plausibility score, higher is better. TransE returns the negated Lp distance.
double score(const ModelParams& params, const Triple& triple);

// Batched scorers: out[e] == score(params, {head, relation, e}) etc.
void score_all_tails(const ModelParams& params, int32_t head, int32_t relation,
                     std::vector<double>& out);
void score_all_heads(const ModelParams& params, int32_t relation, int32_t tail,
                     std::vector<double>& out);

// d score / d row for the three touched rows, each treated as an independent
// variable (a self-loop triple touches the same entity row twice; callers that
// update parameters must sum the head and tail contributions).
struct ScoreGradient {
    std::vector<double> head;
    std::vector<double> relation;
    std::vector<double> tail;
};

ScoreGradient score_gradient(const ModelParams& params, const Triple& triple);

// Accumulates weight * dscore/drow into the three destination rows.
void accumulate_score_gradient(const ModelParams& params, const Triple& triple, double weight,
                               std::span<double> d_head, std::span<double> d_relation,
                               std::span<double> d_tail);

// Circular correlation [a*b]_k = sum_i a_i b_{(i+k) mod d}. The direct modular
// sum is the reference; the FFT path computes the same thing in O(d log d).
void circular_correlation(std::span<const double> a, std::span<const double> b,
                          std::span<double> out);
void circular_correlation_fft(std::span<const double> a, std::span<const double> b,
                              std::span<double> out);

// Checkpoint: "KGE1" magic, kind tag, dim, table sizes, row-major f64 tables,
// then the two label lists. Rejects wrong magic and truncated files.
void save_checkpoint(const ModelParams& params, const Dictionary& entities,
                     const Dictionary& relations, const std::string& path);

struct Checkpoint {
    ModelParams params;
    std::shared_ptr<const Dictionary> entities;
    std::shared_ptr<const Dictionary> relations;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace kge
