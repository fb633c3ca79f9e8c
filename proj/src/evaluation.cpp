#include "kge/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "kge/common.hpp"

namespace kge {

Protocol parse_protocol(const std::string& name) {
    if (name == "raw") return Protocol::Raw;
    if (name == "filtered") return Protocol::Filtered;
    throw std::invalid_argument("unknown protocol: " + name);
}

std::string protocol_name(Protocol protocol) {
    return protocol == Protocol::Raw ? "raw" : "filtered";
}

std::string side_name(Side side) {
    switch (side) {
        case Side::Head: return "head";
        case Side::Tail: return "tail";
        case Side::Both: return "both";
    }
    throw std::invalid_argument("bad side");
}

namespace {

double rank_from_scores(const std::vector<double>& scores, int32_t true_id,
                        std::span<const int32_t> known, bool filtered) {
    const double true_score = scores[static_cast<std::size_t>(true_id)];
    std::size_t greater = 0, equal = 0;
    for (std::size_t id = 0; id < scores.size(); ++id) {
        if (static_cast<int32_t>(id) == true_id) continue;
        if (filtered &&
            std::binary_search(known.begin(), known.end(), static_cast<int32_t>(id)))
            continue;
        if (scores[id] > true_score)
            ++greater;
        else if (scores[id] == true_score)
            ++equal;
    }
    return 1.0 + static_cast<double>(greater) + 0.5 * static_cast<double>(equal);
}

void check_filter(Protocol protocol, const FilterIndex* filter) {
    if (protocol == Protocol::Filtered && filter == nullptr)
        throw std::invalid_argument("filtered protocol requires a filter index");
}

}  // namespace

double rank_triple(const ModelParams& params, const Triple& triple, Side side, Protocol protocol,
                   const FilterIndex* filter) {
    check_filter(protocol, filter);
    const bool filtered = protocol == Protocol::Filtered;
    std::vector<double> scores;
    if (side == Side::Tail) {
        score_all_tails(params, triple.head, triple.relation, scores);
        auto known = filtered ? filter->tails(triple.head, triple.relation)
                              : std::span<const int32_t>{};
        return rank_from_scores(scores, triple.tail, known, filtered);
    }
    if (side == Side::Head) {
        score_all_heads(params, triple.relation, triple.tail, scores);
        auto known = filtered ? filter->heads(triple.relation, triple.tail)
                              : std::span<const int32_t>{};
        return rank_from_scores(scores, triple.head, known, filtered);
    }
    throw std::invalid_argument("rank_triple: side must be head or tail");
}

RankReport evaluate(const ModelParams& params, const TripleStore& test, const FilterIndex* filter,
                    Protocol protocol, std::vector<int> hits_levels, int threads) {
    if (test.triples.empty()) throw std::invalid_argument("evaluate: empty test store");
    check_filter(protocol, filter);

    RankReport report;
    report.protocol = protocol;
    report.hits_levels = std::move(hits_levels);
    report.ranks.resize(test.triples.size());

    auto worker = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const Triple& t = test.triples[i];
            report.ranks[i].triple = t;
            report.ranks[i].head_rank = rank_triple(params, t, Side::Head, protocol, filter);
            report.ranks[i].tail_rank = rank_triple(params, t, Side::Tail, protocol, filter);
        }
    };

    const std::size_t n = test.triples.size();
    if (threads <= 1 || n < 2) {
        worker(0, n);
    } else {
        const std::size_t n_workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        const std::size_t chunk = (n + n_workers - 1) / n_workers;
        for (std::size_t w = 0; w < n_workers; ++w) {
            std::size_t begin = w * chunk;
            std::size_t end = std::min(n, begin + chunk);
            if (begin >= end) break;
            pool.emplace_back(worker, begin, end);
        }
        for (auto& t : pool) t.join();
    }
    return report;
}

namespace {

template <typename Fn>
void for_each_rank(const RankReport& report, Side side, Fn&& fn) {
    for (const TripleRank& r : report.ranks) {
        if (side == Side::Head || side == Side::Both) fn(r.head_rank);
        if (side == Side::Tail || side == Side::Both) fn(r.tail_rank);
    }
}

}  // namespace

double RankReport::mrr(Side side) const {
    double sum = 0.0;
    std::size_t count = 0;
    for_each_rank(*this, side, [&](double rank) {
        sum += 1.0 / rank;
        ++count;
    });
    if (count == 0) throw std::logic_error("mrr: no ranks recorded");
    return sum / static_cast<double>(count);
}

double RankReport::hits(int n, Side side) const {
    std::size_t within = 0, count = 0;
    for_each_rank(*this, side, [&](double rank) {
        if (rank <= static_cast<double>(n)) ++within;
        ++count;
    });
    if (count == 0) throw std::logic_error("hits: no ranks recorded");
    return static_cast<double>(within) / static_cast<double>(count);
}

namespace {

std::string fixed6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string format_rank(double rank) {
    if (rank == std::floor(rank)) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.0f", rank);
        return buf;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", rank);
    return buf;
}

}  // namespace

std::string format_report_table(std::span<const RankReport> reports) {
    std::ostringstream out;
    std::vector<int> levels = reports.empty() ? std::vector<int>{} : reports.front().hits_levels;
    out << "protocol  side  mrr     ";
    for (int n : levels) out << " hits@" << n << (n < 10 ? "  " : " ");
    out << '\n';
    for (const RankReport& report : reports) {
        for (Side side : {Side::Head, Side::Tail, Side::Both}) {
            char line[256];
            std::snprintf(line, sizeof(line), "%-8s  %-4s  %.4f", protocol_name(report.protocol).c_str(),
                          side_name(side).c_str(), report.mrr(side));
            out << line;
            for (int n : report.hits_levels) {
                std::snprintf(line, sizeof(line), "  %.4f", report.hits(n, side));
                out << line;
            }
            out << '\n';
        }
    }
    return out.str();
}

void write_report_csv(std::ostream& out, std::span<const RankReport> reports) {
    std::vector<int> levels = reports.empty() ? std::vector<int>{1, 3, 10}
                                              : reports.front().hits_levels;
    out << "protocol,side,mrr";
    for (int n : levels) out << ",hits@" << n;
    out << '\n';
    for (const RankReport& report : reports) {
        for (Side side : {Side::Head, Side::Tail, Side::Both}) {
            out << protocol_name(report.protocol) << ',' << side_name(side) << ','
                << fixed6(report.mrr(side));
            for (int n : report.hits_levels) out << ',' << fixed6(report.hits(n, side));
            out << '\n';
        }
    }
}

void write_per_triple_csv(std::ostream& out, const RankReport& report, const Dictionary& entities,
                          const Dictionary& relations) {
    out << "head,relation,tail,side,rank\n";
    for (const TripleRank& r : report.ranks) {
        const std::string head = csv_field(entities.label(r.triple.head));
        const std::string rel = csv_field(relations.label(r.triple.relation));
        const std::string tail = csv_field(entities.label(r.triple.tail));
        out << head << ',' << rel << ',' << tail << ",head," << format_rank(r.head_rank) << '\n';
        out << head << ',' << rel << ',' << tail << ",tail," << format_rank(r.tail_rank) << '\n';
    }
}

}  // namespace kge
