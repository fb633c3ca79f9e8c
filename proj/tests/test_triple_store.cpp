#include <algorithm>
#include <array>
#include <set>
#include <sstream>

#include "doctest.h"
#include "kge/common.hpp"
#include "kge/triple_store.hpp"
#include "test_support.hpp"

using namespace kge;
using testsup::store_from_lines;

TEST_CASE("ingest builds dictionaries in first-appearance order") {
    auto store = store_from_lines({"D11034\tDRUG_EFFICACY_DISEASE\tH00409", "A\tR\tB"});
    CHECK(store.n_entities() == 4);
    CHECK(store.n_relations() == 2);
    CHECK(store.size() == 2);
    CHECK(store.entities->label(0) == "D11034");
    CHECK(store.entities->label(1) == "H00409");
    CHECK(store.entities->label(2) == "A");
    CHECK(store.relations->label(0) == "DRUG_EFFICACY_DISEASE");
    CHECK(store.triples[0] == Triple{0, 0, 1});
}

TEST_CASE("ingest deduplicates repeated lines with a count") {
    auto store = store_from_lines({"A\tR\tB", "A\tR\tB"});
    CHECK(store.size() == 1);
    CHECK(store.duplicates_dropped == 1);
}

TEST_CASE("ingest rejects malformed and empty input") {
    std::stringstream bad("A\tR\n");
    CHECK_THROWS_WITH_AS(ingest_tsv(bad, "f"), doctest::Contains("f:1"), std::runtime_error);

    std::stringstream empty("");
    CHECK_THROWS_AS(ingest_tsv(empty, "f"), std::runtime_error);

    std::stringstream comment_only("# just a comment\n");
    CHECK_THROWS_AS(ingest_tsv(comment_only, "f"), std::runtime_error);
}

TEST_CASE("ingest skips comments and ignores extra fields") {
    auto store = store_from_lines({"# header", "A\tR\tB\textra\tfields", "C\tR\tD"});
    CHECK(store.size() == 2);
    CHECK(store.n_entities() == 4);
}

TEST_CASE("export then ingest reproduces unique triples") {
    auto store = store_from_lines({"A\tR\tB", "B\tR\tC", "A\tS\tC", "A\tR\tB"});
    std::stringstream out;
    export_tsv(store, out);
    auto again = ingest_tsv(out, "<roundtrip>");
    REQUIRE(again.size() == store.size());
    for (std::size_t i = 0; i < store.size(); ++i) {
        CHECK(again.entities->label(again.triples[i].head) ==
              store.entities->label(store.triples[i].head));
        CHECK(again.relations->label(again.triples[i].relation) ==
              store.relations->label(store.triples[i].relation));
        CHECK(again.entities->label(again.triples[i].tail) ==
              store.entities->label(store.triples[i].tail));
    }
}

TEST_CASE("dictionary stays a bijection") {
    auto store = store_from_lines({"A\tR\tB", "B\tR\tC", "C\tS\tA"});
    for (int32_t id = 0; id < store.n_entities(); ++id)
        CHECK(store.entities->at(store.entities->label(id)) == id);
    for (int32_t id = 0; id < store.n_relations(); ++id)
        CHECK(store.relations->at(store.relations->label(id)) == id);
    CHECK(!store.entities->find("missing").has_value());
    CHECK_THROWS_WITH_AS(store.entities->at("missing"), doctest::Contains("missing"),
                         std::runtime_error);
}

TEST_CASE("split partitions deterministically") {
    std::vector<std::string> lines;
    for (int i = 0; i < 5; ++i) {
        lines.push_back("hub\tr\te" + std::to_string(i));
        lines.push_back("e" + std::to_string(i) + "\tr\thub");
    }
    auto store = store_from_lines(lines);
    REQUIRE(store.size() == 10);

    auto result = split(store, 0.2, 7);
    CHECK(result.train.size() + result.test.size() == 10);
    CHECK(result.test.size() <= 2);

    std::set<std::array<int32_t, 3>> train_set, test_set;
    for (const auto& t : result.train.triples)
        train_set.insert(std::array<int32_t, 3>{t.head, t.relation, t.tail});
    for (const auto& t : result.test.triples)
        test_set.insert(std::array<int32_t, 3>{t.head, t.relation, t.tail});
    for (const auto& t : test_set) CHECK(train_set.count(t) == 0);
    CHECK(train_set.size() + test_set.size() == 10);

    auto rerun = split(store, 0.2, 7);
    CHECK(rerun.train.triples == result.train.triples);
    CHECK(rerun.test.triples == result.test.triples);
}

TEST_CASE("split keeps every test entity and relation covered in train") {
    // Every entity appears exactly once, so any tentative test draw must be
    // pushed back into train.
    auto store = store_from_lines({"a\tr\tb", "c\tr\td", "e\tr\tf", "g\tr\th", "i\tr\tj"});
    auto result = split(store, 0.2, 3);
    CHECK(result.test.size() == 0);
    CHECK(result.reassigned_to_train == 1);
    CHECK(result.achieved_test_fraction == 0.0);

    std::vector<std::string> lines;
    Rng rng(99);
    for (int i = 0; i < 60; ++i) {
        int h = static_cast<int>(uniform_index(rng, 12));
        int t = static_cast<int>(uniform_index(rng, 12));
        int r = static_cast<int>(uniform_index(rng, 3));
        lines.push_back("e" + std::to_string(h) + "\tr" + std::to_string(r) + "\te" +
                        std::to_string(t));
    }
    auto big = store_from_lines(lines);
    for (uint64_t seed : {1, 2, 3, 4}) {
        auto s = split(big, 0.25, seed);
        std::vector<int> ent_seen(static_cast<std::size_t>(big.n_entities()), 0);
        std::vector<int> rel_seen(static_cast<std::size_t>(big.n_relations()), 0);
        for (const auto& t : s.train.triples) {
            ent_seen[t.head] = ent_seen[t.tail] = 1;
            rel_seen[t.relation] = 1;
        }
        for (const auto& t : s.test.triples) {
            CHECK(ent_seen[t.head] == 1);
            CHECK(ent_seen[t.tail] == 1);
            CHECK(rel_seen[t.relation] == 1);
        }
    }
}

TEST_CASE("split validates its fraction") {
    auto store = store_from_lines({"A\tR\tB"});
    CHECK_THROWS_AS(split(store, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(split(store, 1.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(split(store, -0.5, 1), std::invalid_argument);
}

TEST_CASE("filter index answers exact membership") {
    auto store = store_from_lines({"e0\tr0\te1"});
    auto index = FilterIndex::build(store);
    CHECK(index.contains(Triple{0, 0, 1}));
    CHECK(!index.contains(Triple{0, 0, 2}));

    auto both = store_from_lines({"e0\tr0\te1", "e0\tr0\te2"});
    TripleStore train{{Triple{0, 0, 1}}, both.entities, both.relations};
    TripleStore test{{Triple{0, 0, 2}}, both.entities, both.relations};
    const TripleStore* stores[] = {&train, &test};
    auto merged = FilterIndex::build(std::span<const TripleStore* const>(stores, 2));
    CHECK(merged.contains(Triple{0, 0, 1}));
    CHECK(merged.contains(Triple{0, 0, 2}));
    CHECK(!merged.contains(Triple{1, 0, 2}));

    auto tails = merged.tails(0, 0);
    REQUIRE(tails.size() == 2);
    CHECK(tails[0] == 1);
    CHECK(tails[1] == 2);
    CHECK(merged.heads(0, 1).size() == 1);
    CHECK(merged.tails(1, 0).empty());
}

TEST_CASE("filter index rejects mismatched dictionaries") {
    auto a = store_from_lines({"A\tR\tB"});
    auto b = store_from_lines({"X\tR\tY"});
    const TripleStore* stores[] = {&a, &b};
    CHECK_THROWS_AS(FilterIndex::build(std::span<const TripleStore* const>(stores, 2)),
                    std::runtime_error);
}

TEST_CASE("encode_tsv resolves against existing dictionaries") {
    auto base = store_from_lines({"A\tR\tB", "C\tR\tB"});
    testsup::TempDir dir;
    testsup::write_file(dir.file("ok.tsv"), "C\tR\tA\n");
    auto encoded = encode_tsv(dir.file("ok.tsv"), base.entities, base.relations);
    CHECK(encoded.size() == 1);
    CHECK(encoded.triples[0] == Triple{2, 0, 0});

    testsup::write_file(dir.file("bad.tsv"), "Z\tR\tA\n");
    CHECK_THROWS_WITH_AS(encode_tsv(dir.file("bad.tsv"), base.entities, base.relations),
                         doctest::Contains("Z"), std::runtime_error);
}

TEST_CASE("entity types and display names load from sidecars") {
    auto store = store_from_lines({"A\tR\tB", "C\tR\tB"});
    testsup::TempDir dir;
    testsup::write_file(dir.file("types.tsv"), "A\tdrug\nB\tgene\nunknown_entity\tdrug\n");
    auto types = load_entity_types(dir.file("types.tsv"), *store.entities);
    REQUIRE(types.size() == 3);
    CHECK(types[0] == "drug");
    CHECK(types[1] == "gene");
    CHECK(types[2] == "");

    testsup::write_file(dir.file("names.tsv"), "A\tAspirin (USP)\n");
    auto names = load_display_names(dir.file("names.tsv"));
    CHECK(names.at("A") == "Aspirin (USP)");
}
