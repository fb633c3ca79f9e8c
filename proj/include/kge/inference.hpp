#pragma once

#include <array>
#include <cmath>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "kge/evaluation.hpp"
#include "kge/model.hpp"
#include "kge/triple_store.hpp"

namespace kge {

// Logistic function 1/(1+e^-x), sign-split so large |x| never overflows.
inline double expit(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

struct StatementAssessment {
    Triple triple;
    std::string head, relation, tail;
    double rank = 0.0;  // tail-replacement rank under the chosen protocol
    double score = 0.0;
    double probability = 0.0;
    Protocol protocol = Protocol::Filtered;
};

StatementAssessment assess_statement(const ModelParams& params, const Dictionary& entities,
                                     const Dictionary& relations, const std::string& head,
                                     const std::string& relation, const std::string& tail,
                                     const FilterIndex* filter, Protocol protocol);

struct AssessmentRow {
    std::array<std::string, 3> statement;
    std::optional<StatementAssessment> result;
    std::string error;  // set when the row failed to resolve
};

// Elementwise assess_statement; bad rows become error markers, order preserved.
std::vector<AssessmentRow> batch_assess(const ModelParams& params, const Dictionary& entities,
                                        const Dictionary& relations,
                                        const std::vector<std::array<std::string, 3>>& statements,
                                        const FilterIndex* filter, Protocol protocol);

std::vector<std::array<std::string, 3>> load_statements_tsv(const std::string& path);

// CSV columns: statement, rank, score, probability (6 decimal places).
void write_assessments_csv(std::ostream& out, const std::vector<AssessmentRow>& rows);

}  // namespace kge
