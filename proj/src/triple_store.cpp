#include "kge/triple_store.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "kge/common.hpp"

namespace kge {

namespace {

uint64_t pair_key(int32_t a, int32_t b) {
    return (static_cast<uint64_t>(static_cast<uint32_t>(a)) << 32) | static_cast<uint32_t>(b);
}

}  // namespace

int32_t Dictionary::add(const std::string& label) {
    auto it = ids_.find(label);
    if (it != ids_.end()) return it->second;
    int32_t id = static_cast<int32_t>(labels_.size());
    labels_.push_back(label);
    ids_.emplace(label, id);
    return id;
}

std::optional<int32_t> Dictionary::find(const std::string& label) const {
    auto it = ids_.find(label);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

int32_t Dictionary::at(const std::string& label) const {
    auto it = ids_.find(label);
    if (it == ids_.end()) throw std::runtime_error("unknown label: " + label);
    return it->second;
}

const std::string& Dictionary::label(int32_t id) const {
    if (id < 0 || id >= size()) throw std::out_of_range("dictionary id out of range");
    return labels_[static_cast<std::size_t>(id)];
}

bool same_dictionaries(const TripleStore& a, const TripleStore& b) {
    if (a.entities == b.entities && a.relations == b.relations) return true;
    if (!a.entities || !b.entities || !a.relations || !b.relations) return false;
    return a.entities->labels() == b.entities->labels() &&
           a.relations->labels() == b.relations->labels();
}

FilterIndex FilterIndex::build(std::span<const TripleStore* const> stores) {
    if (stores.empty()) throw std::invalid_argument("FilterIndex: no stores");
    for (std::size_t i = 1; i < stores.size(); ++i) {
        if (!same_dictionaries(*stores[0], *stores[i]))
            throw std::runtime_error("FilterIndex: stores do not share dictionaries");
    }
    FilterIndex index;
    for (const TripleStore* store : stores) {
        for (const Triple& t : store->triples) {
            index.tails_[pair_key(t.head, t.relation)].push_back(t.tail);
            index.heads_[pair_key(t.relation, t.tail)].push_back(t.head);
        }
    }
    auto sort_unique = [](std::unordered_map<uint64_t, std::vector<int32_t>>& m) {
        for (auto& [key, ids] : m) {
            std::sort(ids.begin(), ids.end());
            ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        }
    };
    sort_unique(index.tails_);
    sort_unique(index.heads_);
    return index;
}

FilterIndex FilterIndex::build(const TripleStore& store) {
    const TripleStore* one[] = {&store};
    return build(std::span<const TripleStore* const>(one, 1));
}

bool FilterIndex::contains(const Triple& t) const {
    auto it = tails_.find(pair_key(t.head, t.relation));
    if (it == tails_.end()) return false;
    return std::binary_search(it->second.begin(), it->second.end(), t.tail);
}

std::span<const int32_t> FilterIndex::tails(int32_t head, int32_t relation) const {
    auto it = tails_.find(pair_key(head, relation));
    if (it == tails_.end()) return {};
    return it->second;
}

std::span<const int32_t> FilterIndex::heads(int32_t relation, int32_t tail) const {
    auto it = heads_.find(pair_key(relation, tail));
    if (it == heads_.end()) return {};
    return it->second;
}

TripleStore ingest_tsv(std::istream& in, const std::string& name) {
    auto entities = std::make_shared<Dictionary>();
    auto relations = std::make_shared<Dictionary>();
    TripleStore store;
    std::unordered_set<Triple, TripleHash> seen;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_on(line, '\t');
        if (fields.size() < 3)
            throw std::runtime_error(name + ":" + std::to_string(line_no) +
                                     ": expected 3 tab-separated fields, got " +
                                     std::to_string(fields.size()));
        Triple t;
        t.head = entities->add(std::string(fields[0]));
        t.relation = relations->add(std::string(fields[1]));
        t.tail = entities->add(std::string(fields[2]));
        if (!seen.insert(t).second) {
            ++store.duplicates_dropped;
            continue;
        }
        store.triples.push_back(t);
    }
    if (store.triples.empty())
        throw std::runtime_error(name + ": no triples found");
    store.entities = std::move(entities);
    store.relations = std::move(relations);
    return store;
}

TripleStore ingest_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return ingest_tsv(in, path);
}

TripleStore encode_tsv(const std::string& path,
                       std::shared_ptr<const Dictionary> entities,
                       std::shared_ptr<const Dictionary> relations) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    TripleStore store;
    store.entities = entities;
    store.relations = relations;
    std::unordered_set<Triple, TripleHash> seen;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_on(line, '\t');
        if (fields.size() < 3)
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": expected 3 tab-separated fields, got " +
                                     std::to_string(fields.size()));
        Triple t;
        t.head = entities->at(std::string(fields[0]));
        t.relation = relations->at(std::string(fields[1]));
        t.tail = entities->at(std::string(fields[2]));
        if (!seen.insert(t).second) {
            ++store.duplicates_dropped;
            continue;
        }
        store.triples.push_back(t);
    }
    if (store.triples.empty())
        throw std::runtime_error(path + ": no triples found");
    return store;
}

void export_tsv(const TripleStore& store, std::ostream& out) {
    for (const Triple& t : store.triples) {
        out << store.entities->label(t.head) << '\t'
            << store.relations->label(t.relation) << '\t'
            << store.entities->label(t.tail) << '\n';
    }
}

void export_tsv(const TripleStore& store, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    export_tsv(store, out);
}

SplitResult split(const TripleStore& store, double test_fraction, uint64_t seed) {
    if (store.triples.empty()) throw std::invalid_argument("split: empty store");
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw std::invalid_argument("split: test_fraction must lie in (0,1)");

    const std::size_t n = store.triples.size();
    const auto target = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    fisher_yates_shuffle(order, rng);

    std::vector<bool> in_test(n, false);
    for (std::size_t i = 0; i < target; ++i) in_test[order[i]] = true;

    // Occurrence counts over the tentative train set, used to enforce that
    // every test entity/relation keeps at least one train appearance.
    std::vector<int> ent_count(static_cast<std::size_t>(store.n_entities()), 0);
    std::vector<int> rel_count(static_cast<std::size_t>(store.n_relations()), 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (in_test[i]) continue;
        const Triple& t = store.triples[i];
        ++ent_count[static_cast<std::size_t>(t.head)];
        ++ent_count[static_cast<std::size_t>(t.tail)];
        ++rel_count[static_cast<std::size_t>(t.relation)];
    }

    SplitResult result;
    for (std::size_t i = 0; i < target; ++i) {
        std::size_t idx = order[i];
        const Triple& t = store.triples[idx];
        bool covered = ent_count[static_cast<std::size_t>(t.head)] > 0 &&
                       ent_count[static_cast<std::size_t>(t.tail)] > 0 &&
                       rel_count[static_cast<std::size_t>(t.relation)] > 0;
        if (!covered) {
            in_test[idx] = false;
            ++ent_count[static_cast<std::size_t>(t.head)];
            ++ent_count[static_cast<std::size_t>(t.tail)];
            ++rel_count[static_cast<std::size_t>(t.relation)];
            ++result.reassigned_to_train;
        }
    }

    result.train.entities = store.entities;
    result.train.relations = store.relations;
    result.test.entities = store.entities;
    result.test.relations = store.relations;
    for (std::size_t i = 0; i < n; ++i) {
        if (in_test[i])
            result.test.triples.push_back(store.triples[i]);
        else
            result.train.triples.push_back(store.triples[i]);
    }
    result.achieved_test_fraction =
        static_cast<double>(result.test.triples.size()) / static_cast<double>(n);
    return result;
}

std::vector<std::string> load_entity_types(const std::string& path, const Dictionary& entities) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<std::string> types(static_cast<std::size_t>(entities.size()));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_on(line, '\t');
        if (fields.size() < 2)
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": expected entity<TAB>type");
        if (auto id = entities.find(std::string(fields[0])))
            types[static_cast<std::size_t>(*id)] = std::string(fields[1]);
    }
    return types;
}

std::unordered_map<std::string, std::string> load_display_names(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::unordered_map<std::string, std::string> names;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_on(line, '\t');
        if (fields.size() >= 2) names[std::string(fields[0])] = std::string(fields[1]);
    }
    return names;
}

}  // namespace kge
