#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace kge {

struct Triple {
    int32_t head = 0;
    int32_t relation = 0;
    int32_t tail = 0;

    friend bool operator==(const Triple&, const Triple&) = default;
};

struct TripleHash {
    std::size_t operator()(const Triple& t) const {
        uint64_t h = static_cast<uint32_t>(t.head);
        h = h * 0x9e3779b97f4a7c15ULL + static_cast<uint32_t>(t.relation);
        h = h * 0x9e3779b97f4a7c15ULL + static_cast<uint32_t>(t.tail);
        return static_cast<std::size_t>(h ^ (h >> 32));
    }
};

// Bijective label <-> dense id mapping. Ids are assigned in first-appearance order.
class Dictionary {
public:
    int32_t add(const std::string& label);
    std::optional<int32_t> find(const std::string& label) const;
    int32_t at(const std::string& label) const;  // throws naming the label
    const std::string& label(int32_t id) const;
    int32_t size() const { return static_cast<int32_t>(labels_.size()); }
    const std::vector<std::string>& labels() const { return labels_; }

private:
    std::vector<std::string> labels_;
    std::unordered_map<std::string, int32_t> ids_;
};

struct TripleStore {
    std::vector<Triple> triples;
    std::shared_ptr<const Dictionary> entities;
    std::shared_ptr<const Dictionary> relations;
    std::size_t duplicates_dropped = 0;

    std::size_t size() const { return triples.size(); }
    int32_t n_entities() const { return entities ? entities->size() : 0; }
    int32_t n_relations() const { return relations ? relations->size() : 0; }
};

bool same_dictionaries(const TripleStore& a, const TripleStore& b);

// Membership index over one or more stores; answers "is this a known true triple"
// and enumerates known tails/heads for filtered ranking.
class FilterIndex {
public:
    static FilterIndex build(std::span<const TripleStore* const> stores);
    static FilterIndex build(const TripleStore& store);

    bool contains(const Triple& t) const;
    // Known tails for (head, relation); sorted ascending. Empty span if none.
    std::span<const int32_t> tails(int32_t head, int32_t relation) const;
    // Known heads for (relation, tail); sorted ascending.
    std::span<const int32_t> heads(int32_t relation, int32_t tail) const;

private:
    std::unordered_map<uint64_t, std::vector<int32_t>> tails_;
    std::unordered_map<uint64_t, std::vector<int32_t>> heads_;
};

// TSV ingestion: one triple per line, tab separated, '#' lines skipped,
// duplicates dropped and counted. Dictionaries built in first-appearance order.
TripleStore ingest_tsv(const std::string& path);
TripleStore ingest_tsv(std::istream& in, const std::string& name);

// Same format, but labels must resolve in the given dictionaries.
TripleStore encode_tsv(const std::string& path,
                       std::shared_ptr<const Dictionary> entities,
                       std::shared_ptr<const Dictionary> relations);

void export_tsv(const TripleStore& store, std::ostream& out);
void export_tsv(const TripleStore& store, const std::string& path);

struct SplitResult {
    TripleStore train;
    TripleStore test;
    double achieved_test_fraction = 0.0;
    std::size_t reassigned_to_train = 0;  // test draws forced back for coverage
};

// Uniform random partition. Every entity and relation in test also appears in
// train; violating triples are reassigned to train.
SplitResult split(const TripleStore& store, double test_fraction, uint64_t seed);

// Optional "entity<TAB>type" sidecar. Returns one tag per entity id, "" when untyped.
std::vector<std::string> load_entity_types(const std::string& path, const Dictionary& entities);

// Optional "entity<TAB>display name" sidecar.
std::unordered_map<std::string, std::string> load_display_names(const std::string& path);

}  // namespace kge
