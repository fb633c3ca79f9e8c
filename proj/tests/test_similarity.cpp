#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "kge/common.hpp"
#include "kge/inference.hpp"
#include "kge/similarity.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace kge;
using testsup::make_params;
using testsup::store_from_lines;

TEST_CASE("cosine hand values and validation") {
    const std::vector<double> ex = {1, 0}, ey = {0, 1}, ones = {1, 1}, neg = {-1, -1};
    CHECK(cosine(ex, ex) == doctest::Approx(1.0));
    CHECK(cosine(ex, ey) == doctest::Approx(0.0));
    CHECK(cosine(ones, neg) == doctest::Approx(-1.0));
    CHECK(cosine(ones, neg) >= -1.0);  // clamped against drift

    const std::vector<double> zero = {0, 0}, three = {1, 2, 3};
    CHECK_THROWS_AS(cosine(ex, zero), std::invalid_argument);
    CHECK_THROWS_AS(cosine(ex, three), std::invalid_argument);
}

TEST_CASE("cosine ignores a common positive scale") {
    Rng rng(5);
    std::vector<double> a(8), b(8);
    for (double& x : a) x = 2.0 * uniform_double(rng) - 1.0;
    for (double& x : b) x = 2.0 * uniform_double(rng) - 1.0;
    auto a5 = a, b5 = b;
    for (double& x : a5) x *= 5.0;
    for (double& x : b5) x *= 5.0;
    CHECK(cosine(a5, b5) == doctest::Approx(cosine(a, b)).epsilon(1e-12));
}

TEST_CASE("prediction profile definition and averaging") {
    auto p = oracle::random_params(ModelKind::ComplEx, 3, 6, 3, 44);
    const int32_t drug = 0;
    const std::vector<int32_t> entities = {1, 2, 3, 4, 5};

    SUBCASE("single relation single entity is one expit score") {
        const std::vector<int32_t> rel = {1}, one = {3};
        auto profile = prediction_profile(p, drug, rel, one);
        REQUIRE(profile.size() == 1);
        CHECK(profile[0] == doctest::Approx(expit(score(p, Triple{drug, 1, 3}))).epsilon(1e-12));
    }
    SUBCASE("two relations average the single-relation profiles") {
        const std::vector<int32_t> r0 = {0}, r1 = {2}, both = {0, 2};
        auto p0 = prediction_profile(p, drug, r0, entities);
        auto p1 = prediction_profile(p, drug, r1, entities);
        auto pb = prediction_profile(p, drug, both, entities);
        for (std::size_t i = 0; i < entities.size(); ++i)
            CHECK(pb[i] == doctest::Approx(0.5 * (p0[i] + p1[i])).epsilon(1e-12));
    }
    SUBCASE("zero relation row yields a flat one-half profile") {
        auto flat = make_params(ModelKind::DistMult, 2, {{1, 2}, {3, 4}, {5, 6}}, {{0, 0}});
        const std::vector<int32_t> rel = {0}, ents = {1, 2};
        for (double v : prediction_profile(flat, 0, rel, ents)) CHECK(v == 0.5);
    }
    SUBCASE("both-sides averaging mixes head and tail scores") {
        const std::vector<int32_t> rel = {1}, one = {3};
        auto both = prediction_profile(p, drug, rel, one, ProfileSide::BothSides);
        const double expected = 0.5 * (expit(score(p, Triple{drug, 1, 3})) +
                                       expit(score(p, Triple{3, 1, drug})));
        CHECK(both[0] == doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("empty sets are rejected") {
        const std::vector<int32_t> rel = {0}, none = {};
        CHECK_THROWS_AS(prediction_profile(p, drug, none, entities), std::invalid_argument);
        CHECK_THROWS_AS(prediction_profile(p, drug, rel, none), std::invalid_argument);
    }
}

TEST_CASE("profile mse is a squared metric") {
    const std::vector<double> a = {0.2, 0.4}, b = {0.4, 0.8}, unit_x = {1, 0}, unit_y = {0, 1};
    CHECK(profile_mse(a, a) == 0.0);
    CHECK(profile_mse(unit_x, unit_y) == doctest::Approx(1.0));
    CHECK(profile_mse(a, b) == doctest::Approx(0.1));
    CHECK(profile_mse(a, b) == doctest::Approx(profile_mse(b, a)));
    CHECK(profile_mse(a, b) >= 0.0);
    const std::vector<double> three = {0.1, 0.2, 0.3};
    CHECK_THROWS_AS(profile_mse(a, three), std::invalid_argument);
}

TEST_CASE("sim_score is symmetric and excludes the pair from profiles") {
    auto p = oracle::random_params(ModelKind::ComplEx, 4, 8, 2, 3);
    std::vector<int32_t> relations = {0, 1};
    std::vector<int32_t> entities(8);
    for (int32_t i = 0; i < 8; ++i) entities[i] = i;

    auto ab = sim_score(p, 1, 2, relations, entities);
    auto ba = sim_score(p, 2, 1, relations, entities);
    CHECK(ab.cosine == ba.cosine);
    CHECK(ab.mse == ba.mse);
    CHECK(ab.ratio == ba.ratio);
    CHECK(ab.mse >= 0.0);
    CHECK(!ab.degenerate);
    CHECK(ab.ratio == doctest::Approx(ab.cosine / ab.mse));

    CHECK_THROWS_AS(sim_score(p, 1, 1, relations, entities), std::invalid_argument);
}

TEST_CASE("identical drugs hit the mse floor and get flagged") {
    auto p = oracle::random_params(ModelKind::DistMult, 3, 6, 2, 12);
    // clone entity 2's row into entity 3
    for (int i = 0; i < p.width; ++i) p.entity_row(3)[i] = p.entity_row(2)[i];
    std::vector<int32_t> relations = {0, 1};
    std::vector<int32_t> entities = {0, 1, 2, 3, 4, 5};
    auto row = sim_score(p, 2, 3, relations, entities);
    CHECK(row.degenerate);
    CHECK(row.mse < kMseEpsilon);
    CHECK(row.ratio == doctest::Approx(row.cosine / kMseEpsilon));
    CHECK(row.cosine == doctest::Approx(1.0));
}

TEST_CASE("top_k matches a brute-force sort of sim scores") {
    auto p = oracle::random_params(ModelKind::ComplEx, 3, 20, 2, 90);
    const int32_t query = 0;
    std::vector<int32_t> candidates, entities;
    for (int32_t e = 0; e < 20; ++e) {
        entities.push_back(e);
        if (e != query) candidates.push_back(e);
    }
    std::vector<int32_t> relations = {0, 1};

    auto top = top_k_similar(p, query, candidates, 5, relations, entities);
    REQUIRE(top.size() == 5);

    std::vector<SimilarityRow> brute;
    for (int32_t c : candidates) brute.push_back(sim_score(p, query, c, relations, entities));
    std::sort(brute.begin(), brute.end(), [](const SimilarityRow& a, const SimilarityRow& b) {
        if (a.ratio != b.ratio) return a.ratio > b.ratio;
        return a.candidate < b.candidate;
    });
    for (std::size_t i = 0; i < top.size(); ++i) {
        CHECK(top[i].candidate == brute[i].candidate);
        CHECK(top[i].ratio == brute[i].ratio);
    }
    for (std::size_t i = 1; i < top.size(); ++i) CHECK(top[i - 1].ratio >= top[i].ratio);

    auto parallel = top_k_similar(p, query, candidates, 5, relations, entities,
                                  ProfileSide::TailOnly, 4);
    for (std::size_t i = 0; i < top.size(); ++i) {
        CHECK(parallel[i].candidate == top[i].candidate);
        CHECK(parallel[i].ratio == top[i].ratio);
    }
}

TEST_CASE("top_k handles small candidate sets and validates input") {
    auto p = oracle::random_params(ModelKind::DistMult, 2, 5, 1, 2);
    std::vector<int32_t> candidates = {1, 2};
    std::vector<int32_t> entities = {0, 1, 2, 3, 4};
    std::vector<int32_t> relations = {0};
    CHECK(top_k_similar(p, 0, candidates, 10, relations, entities).size() == 2);
    CHECK_THROWS_AS(top_k_similar(p, 0, {}, 3, relations, entities), std::invalid_argument);
    std::vector<int32_t> with_query = {0, 1};
    CHECK_THROWS_AS(top_k_similar(p, 0, with_query, 3, relations, entities),
                    std::invalid_argument);
}

TEST_CASE("a scaled copy of the query outranks an orthogonal candidate when profiles tie") {
    // Zero relation rows make every profile flat 0.5, so MSE is floored for
    // all candidates and only the cosine separates them.
    auto p = make_params(ModelKind::DistMult, 2,
                         {{1.0, 0.0}, {2.0, 0.0}, {0.0, 1.0}, {0.5, 0.5}}, {{0.0, 0.0}});
    std::vector<int32_t> candidates = {1, 2};
    std::vector<int32_t> entities = {0, 1, 2, 3};
    std::vector<int32_t> relations = {0};
    auto top = top_k_similar(p, 0, candidates, 2, relations, entities);
    REQUIRE(top.size() == 2);
    CHECK(top[0].candidate == 1);  // scaled copy, cosine 1
    CHECK(top[0].cosine == doctest::Approx(1.0));
    CHECK(top[1].candidate == 2);  // orthogonal, cosine 0
    CHECK(top[1].cosine == doctest::Approx(0.0));
    CHECK(top[0].degenerate);
    CHECK(top[1].degenerate);
}

TEST_CASE("tanimoto axioms and hand values") {
    auto a = fingerprint_from_hex("ff00");
    auto b = fingerprint_from_hex("00ff");
    auto c = fingerprint_from_hex("ff00");
    CHECK(tanimoto(a, c) == doctest::Approx(1.0));
    CHECK(tanimoto(a, b) == doctest::Approx(0.0));
    CHECK(tanimoto(a, b) == doctest::Approx(tanimoto(b, a)));

    // a=5 bits, b=7 bits, c=3 common -> 3/9
    auto five = fingerprint_from_hex("f8000000");   // bits 0..4
    auto seven = fingerprint_from_hex("07f00000");  // bits 5..11
    CHECK(five.on_count == 5);
    CHECK(seven.on_count == 7);
    auto overlap = fingerprint_from_hex("3e000000");  // bits 2..6: 3 common with five
    CHECK(overlap.on_count == 5);
    // common(five, overlap) = bits 2,3,4 -> 3; union = 5+5-3 = 7 -> 3/7
    CHECK(tanimoto(five, overlap) == doctest::Approx(3.0 / 7.0));

    auto empty1 = fingerprint_from_hex("0000");
    auto empty2 = fingerprint_from_hex("0000");
    CHECK_THROWS_AS(tanimoto(empty1, empty2), std::invalid_argument);
    CHECK_THROWS_AS(tanimoto(a, fingerprint_from_hex("ff")), std::invalid_argument);

    Rng rng(77);
    for (int rep = 0; rep < 50; ++rep) {
        std::string hex1, hex2;
        const char* digits = "0123456789abcdef";
        for (int i = 0; i < 16; ++i) {
            hex1 += digits[uniform_index(rng, 16)];
            hex2 += digits[uniform_index(rng, 16)];
        }
        auto f1 = fingerprint_from_hex(hex1);
        auto f2 = fingerprint_from_hex(hex2);
        if (f1.on_count == 0 && f2.on_count == 0) continue;
        const double s = tanimoto(f1, f2);
        CHECK(s >= 0.0);
        CHECK(s <= 1.0);
        CHECK(s == doctest::Approx(tanimoto(f2, f1)));
        if (f1.on_count > 0) CHECK(tanimoto(f1, f1) == doctest::Approx(1.0));
    }
}

TEST_CASE("fingerprints parse from hex") {
    auto fp = fingerprint_from_hex("f0");
    CHECK(fp.n_bits == 8);
    CHECK(fp.on_count == 4);
    CHECK_THROWS_AS(fingerprint_from_hex("xy"), std::invalid_argument);

    testsup::TempDir dir;
    testsup::write_file(dir.file("fp.tsv"), "d1\tff00\nd2\t00ff\n");
    auto loaded = load_fingerprints_tsv(dir.file("fp.tsv"));
    CHECK(loaded.size() == 2);
    CHECK(loaded.at("d1").on_count == 8);

    testsup::write_file(dir.file("mixed.tsv"), "d1\tff00\nd2\tff\n");
    CHECK_THROWS_AS(load_fingerprints_tsv(dir.file("mixed.tsv")), std::runtime_error);
}

TEST_CASE("similarity csv mirrors the report shape") {
    auto store = store_from_lines({"q\tr\tc1", "c2\tr\tc1", "c3\tr\tq"});
    auto p = oracle::random_params(ModelKind::DistMult, 2, store.n_entities(), 1, 33);
    std::vector<int32_t> candidates = {1, 2, 3};
    std::vector<int32_t> entities = {0, 1, 2, 3};
    std::vector<int32_t> relations = {0};
    auto rows = top_k_similar(p, 0, candidates, 3, relations, entities);

    std::unordered_map<std::string, std::string> names = {{"c1", "First, candidate"}};
    std::unordered_map<std::string, Fingerprint> fps = {
        {"q", fingerprint_from_hex("ff")}, {"c1", fingerprint_from_hex("0f")}};
    std::ostringstream csv;
    write_similarity_csv(csv, rows, *store.entities, names, fps, "q");
    const std::string csv_text = csv.str();
    auto lines = split_on(csv_text, '\n');
    CHECK(lines[0] == "rank_no,drug_id,cosine,mse,ratio,drug_name,tanimoto");
    CHECK(lines.size() == 2 + rows.size());
    CHECK(lines[1].substr(0, 2) == "1,");

    std::ostringstream bare;
    write_similarity_csv(bare, rows, *store.entities, {}, {}, "q");
    const std::string bare_text = bare.str();
    CHECK(split_on(bare_text, '\n')[0] == "rank_no,drug_id,cosine,mse,ratio");
}
