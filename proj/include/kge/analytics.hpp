#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "kge/triple_store.hpp"

namespace kge {

struct Projection {
    std::size_t n_rows = 0;
    std::vector<double> coords;  // n_rows x 2, row major
    std::array<double, 2> explained_variance{0.0, 0.0};
    std::vector<double> mean;    // column means used for centering
    std::array<std::vector<double>, 2> axes;  // principal directions

    double x(std::size_t i) const { return coords[2 * i]; }
    double y(std::size_t i) const { return coords[2 * i + 1]; }
};

// Top-2 PCA of an n_rows x n_cols matrix via power iteration with deflation
// on the sample covariance (tolerance 1e-10, at most 1000 iterations). Each
// eigenvector's largest-magnitude component is made positive so runs compare
// across machines.
Projection pca_2d(std::span<const double> data, std::size_t n_rows, std::size_t n_cols);

// CSV "entity,x,y,type"; entities without a tag get "unknown".
void export_projection(const Projection& projection, const Dictionary& entities,
                       const std::vector<std::string>& types, std::ostream& out);

}  // namespace kge
