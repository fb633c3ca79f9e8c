#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "kge/model.hpp"
#include "kge/triple_store.hpp"

namespace kge {

enum class Protocol { Raw, Filtered };
enum class Side { Head, Tail, Both };

Protocol parse_protocol(const std::string& name);
std::string protocol_name(Protocol protocol);
std::string side_name(Side side);

struct TripleRank {
    Triple triple;
    double head_rank = 0.0;
    double tail_rank = 0.0;
};

struct RankReport {
    Protocol protocol = Protocol::Filtered;
    std::vector<int> hits_levels;
    std::vector<TripleRank> ranks;

    double mrr(Side side) const;
    double hits(int n, Side side) const;
};

// Average-rank tie rule: 1 + #strictly-greater + 0.5 * #equal among the
// candidates left after protocol filtering. Side must be Head or Tail.
double rank_triple(const ModelParams& params, const Triple& triple, Side side, Protocol protocol,
                   const FilterIndex* filter);

// Ranks every test triple under both head and tail replacement. Parallel
// workers write into per-triple slots, so thread count never changes results.
RankReport evaluate(const ModelParams& params, const TripleStore& test, const FilterIndex* filter,
                    Protocol protocol, std::vector<int> hits_levels = {1, 3, 10}, int threads = 1);

std::string format_report_table(std::span<const RankReport> reports);
void write_report_csv(std::ostream& out, std::span<const RankReport> reports);
void write_per_triple_csv(std::ostream& out, const RankReport& report, const Dictionary& entities,
                          const Dictionary& relations);

}  // namespace kge
