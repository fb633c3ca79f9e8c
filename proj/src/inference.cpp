#include "kge/inference.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

#include "kge/common.hpp"

namespace kge {

StatementAssessment assess_statement(const ModelParams& params, const Dictionary& entities,
                                     const Dictionary& relations, const std::string& head,
                                     const std::string& relation, const std::string& tail,
                                     const FilterIndex* filter, Protocol protocol) {
    StatementAssessment a;
    a.head = head;
    a.relation = relation;
    a.tail = tail;
    a.triple.head = entities.at(head);
    a.triple.relation = relations.at(relation);
    a.triple.tail = entities.at(tail);
    a.protocol = protocol;
    a.score = score(params, a.triple);
    a.probability = expit(a.score);
    a.rank = rank_triple(params, a.triple, Side::Tail, protocol, filter);
    return a;
}

std::vector<AssessmentRow> batch_assess(const ModelParams& params, const Dictionary& entities,
                                        const Dictionary& relations,
                                        const std::vector<std::array<std::string, 3>>& statements,
                                        const FilterIndex* filter, Protocol protocol) {
    std::vector<AssessmentRow> rows;
    rows.reserve(statements.size());
    for (const auto& s : statements) {
        AssessmentRow row;
        row.statement = s;
        try {
            row.result = assess_statement(params, entities, relations, s[0], s[1], s[2], filter,
                                          protocol);
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<std::array<std::string, 3>> load_statements_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<std::array<std::string, 3>> statements;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_on(line, '\t');
        if (fields.size() < 3)
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": expected head<TAB>relation<TAB>tail");
        statements.push_back({std::string(fields[0]), std::string(fields[1]),
                              std::string(fields[2])});
    }
    return statements;
}

void write_assessments_csv(std::ostream& out, const std::vector<AssessmentRow>& rows) {
    out << "statement,rank,score,probability\n";
    char buf[64];
    for (const AssessmentRow& row : rows) {
        const std::string statement =
            csv_field(row.statement[0] + " " + row.statement[1] + " " + row.statement[2]);
        if (!row.result) {
            out << statement << ",error,error," << csv_field(row.error) << '\n';
            continue;
        }
        const StatementAssessment& a = *row.result;
        out << statement << ',';
        if (a.rank == static_cast<double>(static_cast<long long>(a.rank)))
            std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(a.rank));
        else
            std::snprintf(buf, sizeof(buf), "%.1f", a.rank);
        out << buf << ',';
        std::snprintf(buf, sizeof(buf), "%.6f,%.6f", a.score, a.probability);
        out << buf << '\n';
    }
}

}  // namespace kge
