#include "kge/similarity.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <thread>

#include "kge/common.hpp"
#include "kge/inference.hpp"

namespace kge {

double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("cosine: length mismatch");
    if (a.empty()) throw std::invalid_argument("cosine: empty vectors");
    double dot_ab = 0.0, norm_a = 0.0, norm_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot_ab += a[i] * b[i];
        norm_a += a[i] * a[i];
        norm_b += b[i] * b[i];
    }
    if (norm_a == 0.0 || norm_b == 0.0) throw std::invalid_argument("cosine: zero-norm input");
    return std::clamp(dot_ab / (std::sqrt(norm_a) * std::sqrt(norm_b)), -1.0, 1.0);
}

std::vector<double> prediction_profile(const ModelParams& params, int32_t drug,
                                       std::span<const int32_t> relations,
                                       std::span<const int32_t> entities, ProfileSide side) {
    if (relations.empty() || entities.empty())
        throw std::invalid_argument("prediction_profile: empty relation or entity set");

    std::vector<double> profile(entities.size(), 0.0);
    std::vector<double> tail_scores, head_scores;
    for (int32_t r : relations) {
        score_all_tails(params, drug, r, tail_scores);
        if (side == ProfileSide::BothSides) score_all_heads(params, r, drug, head_scores);
        for (std::size_t i = 0; i < entities.size(); ++i) {
            const auto e = static_cast<std::size_t>(entities[i]);
            double p = expit(tail_scores[e]);
            if (side == ProfileSide::BothSides) p = 0.5 * (p + expit(head_scores[e]));
            profile[i] += p;
        }
    }
    const double inv = 1.0 / static_cast<double>(relations.size());
    for (double& p : profile) p *= inv;
    return profile;
}

double profile_mse(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("profile_mse: length mismatch");
    if (a.empty()) throw std::invalid_argument("profile_mse: empty profiles");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

SimilarityRow sim_score(const ModelParams& params, int32_t d1, int32_t d2,
                        std::span<const int32_t> relations, std::span<const int32_t> entities,
                        ProfileSide side) {
    if (d1 == d2) throw std::invalid_argument("sim_score: self-similarity is degenerate");

    std::vector<int32_t> kept;
    kept.reserve(entities.size());
    for (int32_t e : entities)
        if (e != d1 && e != d2) kept.push_back(e);
    if (kept.empty()) throw std::invalid_argument("sim_score: entity set empty after exclusions");

    SimilarityRow row;
    row.candidate = d2;
    row.cosine = cosine(params.entity_row(d1), params.entity_row(d2));
    row.mse = profile_mse(prediction_profile(params, d1, relations, kept, side),
                          prediction_profile(params, d2, relations, kept, side));
    row.degenerate = row.mse < kMseEpsilon;
    row.ratio = row.cosine / std::max(row.mse, kMseEpsilon);
    return row;
}

std::vector<SimilarityRow> top_k_similar(const ModelParams& params, int32_t query,
                                         std::span<const int32_t> candidates, std::size_t k,
                                         std::span<const int32_t> relations,
                                         std::span<const int32_t> entities, ProfileSide side,
                                         int threads) {
    if (k < 1) throw std::invalid_argument("top_k_similar: k must be >= 1");
    if (candidates.empty()) throw std::invalid_argument("top_k_similar: no candidates");
    for (int32_t c : candidates)
        if (c == query) throw std::invalid_argument("top_k_similar: candidate set contains query");

    std::vector<SimilarityRow> rows(candidates.size());
    auto worker = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
            rows[i] = sim_score(params, query, candidates[i], relations, entities, side);
    };
    const std::size_t n = candidates.size();
    if (threads <= 1 || n < 2) {
        worker(0, n);
    } else {
        const std::size_t n_workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
        std::vector<std::thread> pool;
        const std::size_t chunk = (n + n_workers - 1) / n_workers;
        for (std::size_t w = 0; w < n_workers; ++w) {
            std::size_t begin = w * chunk;
            std::size_t end = std::min(n, begin + chunk);
            if (begin >= end) break;
            pool.emplace_back(worker, begin, end);
        }
        for (auto& t : pool) t.join();
    }

    std::sort(rows.begin(), rows.end(), [](const SimilarityRow& a, const SimilarityRow& b) {
        if (a.ratio != b.ratio) return a.ratio > b.ratio;
        return a.candidate < b.candidate;
    });
    if (rows.size() > k) rows.resize(k);
    return rows;
}

Fingerprint fingerprint_from_hex(const std::string& hex) {
    Fingerprint fp;
    fp.n_bits = static_cast<int32_t>(hex.size()) * 4;
    fp.words.assign((hex.size() + 15) / 16, 0);
    for (std::size_t i = 0; i < hex.size(); ++i) {
        const char c = hex[i];
        uint64_t nibble;
        if (c >= '0' && c <= '9') nibble = static_cast<uint64_t>(c - '0');
        else if (c >= 'a' && c <= 'f') nibble = static_cast<uint64_t>(c - 'a' + 10);
        else if (c >= 'A' && c <= 'F') nibble = static_cast<uint64_t>(c - 'A' + 10);
        else throw std::invalid_argument(std::string("fingerprint: bad hex digit '") + c + "'");
        fp.words[i / 16] |= nibble << (4 * (15 - i % 16));
    }
    for (uint64_t w : fp.words) fp.on_count += std::popcount(w);
    return fp;
}

double tanimoto(const Fingerprint& a, const Fingerprint& b) {
    if (a.n_bits != b.n_bits) throw std::invalid_argument("tanimoto: width mismatch");
    if (a.on_count == 0 && b.on_count == 0)
        throw std::invalid_argument("tanimoto: both fingerprints empty");
    int64_t common = 0;
    for (std::size_t i = 0; i < a.words.size(); ++i)
        common += std::popcount(a.words[i] & b.words[i]);
    return static_cast<double>(common) /
           static_cast<double>(a.on_count + b.on_count - common);
}

std::unordered_map<std::string, Fingerprint> load_fingerprints_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::unordered_map<std::string, Fingerprint> fingerprints;
    std::string line;
    std::size_t line_no = 0;
    int32_t width = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_on(line, '\t');
        if (fields.size() < 2)
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": expected entity<TAB>hexbits");
        Fingerprint fp = fingerprint_from_hex(std::string(fields[1]));
        if (width < 0) width = fp.n_bits;
        else if (fp.n_bits != width)
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": fingerprint width differs from previous rows");
        fingerprints[std::string(fields[0])] = std::move(fp);
    }
    return fingerprints;
}

void write_similarity_csv(std::ostream& out, std::span<const SimilarityRow> rows,
                          const Dictionary& entities,
                          const std::unordered_map<std::string, std::string>& names,
                          const std::unordered_map<std::string, Fingerprint>& fingerprints,
                          const std::string& query_label) {
    const bool with_names = !names.empty();
    const Fingerprint* query_fp = nullptr;
    if (!fingerprints.empty()) {
        auto it = fingerprints.find(query_label);
        if (it != fingerprints.end()) query_fp = &it->second;
    }
    out << "rank_no,drug_id,cosine,mse,ratio";
    if (with_names) out << ",drug_name";
    if (query_fp) out << ",tanimoto";
    out << '\n';

    char buf[96];
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const SimilarityRow& row = rows[i];
        const std::string& label = entities.label(row.candidate);
        std::snprintf(buf, sizeof(buf), "%zu,%s,%.6f,%.6f,%.6f", i + 1,
                      csv_field(label).c_str(), row.cosine, row.mse, row.ratio);
        out << buf;
        if (with_names) {
            auto it = names.find(label);
            out << ',' << csv_field(it == names.end() ? "" : it->second);
        }
        if (query_fp) {
            auto it = fingerprints.find(label);
            if (it == fingerprints.end()) {
                out << ',';
            } else {
                std::snprintf(buf, sizeof(buf), ",%.6f", tanimoto(*query_fp, it->second));
                out << buf;
            }
        }
        out << '\n';
    }
}

}  // namespace kge
