#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "kge/model.hpp"
#include "kge/triple_store.hpp"

namespace kge {

// Floor applied to the profile MSE before dividing (near-identical drugs).
inline constexpr double kMseEpsilon = 1e-12;

double cosine(std::span<const double> a, std::span<const double> b);

enum class ProfileSide { TailOnly, BothSides };

// Calibrated link-probability footprint of one drug: for each entity, the mean
// over the chosen relations of expit(score(drug, r, entity)), tail side by
// default; BothSides also averages in expit(score(entity, r, drug)).
std::vector<double> prediction_profile(const ModelParams& params, int32_t drug,
                                       std::span<const int32_t> relations,
                                       std::span<const int32_t> entities,
                                       ProfileSide side = ProfileSide::TailOnly);

double profile_mse(std::span<const double> a, std::span<const double> b);

struct SimilarityRow {
    int32_t candidate = -1;
    double cosine = 0.0;
    double mse = 0.0;
    double ratio = 0.0;
    bool degenerate = false;  // MSE hit the epsilon floor
};

// Ratio = cosine(embeddings) / max(MSE of profiles, epsilon). The two drugs
// are always excluded from the profile entity set.
SimilarityRow sim_score(const ModelParams& params, int32_t d1, int32_t d2,
                        std::span<const int32_t> relations, std::span<const int32_t> entities,
                        ProfileSide side = ProfileSide::TailOnly);

// Rows sorted descending by ratio, ties by entity id ascending.
std::vector<SimilarityRow> top_k_similar(const ModelParams& params, int32_t query,
                                         std::span<const int32_t> candidates, std::size_t k,
                                         std::span<const int32_t> relations,
                                         std::span<const int32_t> entities,
                                         ProfileSide side = ProfileSide::TailOnly,
                                         int threads = 1);

struct Fingerprint {
    std::vector<uint64_t> words;
    int32_t n_bits = 0;
    int64_t on_count = 0;
};

Fingerprint fingerprint_from_hex(const std::string& hex);
double tanimoto(const Fingerprint& a, const Fingerprint& b);

// "entity<TAB>hexbits" rows; all fingerprints must share one bit width.
std::unordered_map<std::string, Fingerprint> load_fingerprints_tsv(const std::string& path);

// Table shape: rank_no, drug_id, cosine, mse, ratio, then drug_name and
// tanimoto columns when the sidecar data is present.
void write_similarity_csv(std::ostream& out, std::span<const SimilarityRow> rows,
                          const Dictionary& entities,
                          const std::unordered_map<std::string, std::string>& names,
                          const std::unordered_map<std::string, Fingerprint>& fingerprints,
                          const std::string& query_label);

}  // namespace kge
