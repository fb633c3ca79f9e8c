#include <cmath>
#include <sstream>

#include "doctest.h"
#include "kge/analytics.hpp"
#include "kge/common.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace kge;

namespace {

std::vector<double> random_matrix(std::size_t rows, std::size_t cols, uint64_t seed) {
    std::vector<double> m(rows * cols);
    Rng rng(seed);
    for (double& v : m) v = 4.0 * uniform_double(rng) - 2.0;
    return m;
}

std::vector<double> covariance_of(const std::vector<double>& data, std::size_t rows,
                                  std::size_t cols) {
    std::vector<double> mean(cols, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) mean[j] += data[i * cols + j];
    for (double& m : mean) m /= static_cast<double>(rows);
    std::vector<double> cov(cols * cols, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t a = 0; a < cols; ++a)
            for (std::size_t b = 0; b < cols; ++b)
                cov[a * cols + b] +=
                    (data[i * cols + a] - mean[a]) * (data[i * cols + b] - mean[b]);
    for (double& v : cov) v /= static_cast<double>(rows - 1);
    return cov;
}

double axis_distance_up_to_sign(const std::vector<double>& a, const std::vector<double>& b) {
    double same = 0.0, flipped = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        same += (a[i] - b[i]) * (a[i] - b[i]);
        flipped += (a[i] + b[i]) * (a[i] + b[i]);
    }
    return std::sqrt(std::min(same, flipped));
}

}  // namespace

TEST_CASE("collinear points collapse to one axis") {
    const std::vector<double> data = {1, 1, 2, 2, 3, 3};
    auto proj = pca_2d(data, 3, 2);
    CHECK(proj.explained_variance[0] == doctest::Approx(2.0));
    CHECK(proj.explained_variance[1] == doctest::Approx(0.0).epsilon(1e-12));
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    CHECK(proj.axes[0][0] == doctest::Approx(inv_sqrt2));
    CHECK(proj.axes[0][1] == doctest::Approx(inv_sqrt2));
    // second coordinates vanish for rank-1 data
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(proj.y(i)) < 1e-9);
}

TEST_CASE("an isotropic cross has equal explained variances") {
    const std::vector<double> data = {1, 0, -1, 0, 0, 1, 0, -1};
    auto proj = pca_2d(data, 4, 2);
    CHECK(proj.explained_variance[0] ==
          doctest::Approx(proj.explained_variance[1]).epsilon(1e-9));
}

TEST_CASE("power iteration matches the dense jacobi oracle") {
    for (uint64_t seed : {100, 101, 102, 103, 104}) {
        auto data = random_matrix(50, 10, seed);
        auto proj = pca_2d(data, 50, 10);
        auto eig = oracle::jacobi_eigen(covariance_of(data, 50, 10), 10);
        CHECK(std::abs(proj.explained_variance[0] - eig.values[0]) < 1e-8);
        CHECK(std::abs(proj.explained_variance[1] - eig.values[1]) < 1e-8);
        CHECK(axis_distance_up_to_sign(proj.axes[0], eig.vectors[0]) < 1e-6);
        CHECK(axis_distance_up_to_sign(proj.axes[1], eig.vectors[1]) < 1e-6);
    }
}

TEST_CASE("projection is invariant to orthogonal rotations of the input") {
    const std::size_t rows = 40, cols = 6;
    auto data = random_matrix(rows, cols, 55);

    // Build an orthogonal matrix by Gram-Schmidt over a random one.
    auto q = random_matrix(cols, cols, 56);
    for (std::size_t i = 0; i < cols; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            double proj = 0.0;
            for (std::size_t k = 0; k < cols; ++k) proj += q[i * cols + k] * q[j * cols + k];
            for (std::size_t k = 0; k < cols; ++k) q[i * cols + k] -= proj * q[j * cols + k];
        }
        double norm = 0.0;
        for (std::size_t k = 0; k < cols; ++k) norm += q[i * cols + k] * q[i * cols + k];
        norm = std::sqrt(norm);
        for (std::size_t k = 0; k < cols; ++k) q[i * cols + k] /= norm;
    }

    std::vector<double> rotated(rows * cols, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t a = 0; a < cols; ++a)
            for (std::size_t k = 0; k < cols; ++k)
                rotated[i * cols + a] += data[i * cols + k] * q[a * cols + k];

    auto before = pca_2d(data, rows, cols);
    auto after = pca_2d(rotated, rows, cols);
    CHECK(std::abs(before.explained_variance[0] - after.explained_variance[0]) < 1e-8);
    CHECK(std::abs(before.explained_variance[1] - after.explained_variance[1]) < 1e-8);

    // Coordinates agree up to a per-axis sign.
    for (int axis = 0; axis < 2; ++axis) {
        double same = 0.0, flipped = 0.0;
        for (std::size_t i = 0; i < rows; ++i) {
            const double a = before.coords[2 * i + axis], b = after.coords[2 * i + axis];
            same = std::max(same, std::abs(a - b));
            flipped = std::max(flipped, std::abs(a + b));
        }
        CHECK(std::min(same, flipped) < 1e-6);
    }
}

TEST_CASE("variance accounting") {
    auto data = random_matrix(30, 8, 77);
    auto proj = pca_2d(data, 30, 8);
    CHECK(proj.explained_variance[0] >= proj.explained_variance[1]);
    CHECK(proj.explained_variance[1] >= 0.0);

    auto cov = covariance_of(data, 30, 8);
    double trace = 0.0;
    for (std::size_t a = 0; a < 8; ++a) trace += cov[a * 8 + a];
    CHECK(proj.explained_variance[0] + proj.explained_variance[1] <= trace + 1e-9);

    // Coordinate variances equal the eigenvalues.
    for (int axis = 0; axis < 2; ++axis) {
        double mean = 0.0;
        for (std::size_t i = 0; i < 30; ++i) mean += proj.coords[2 * i + axis];
        mean /= 30.0;
        double var = 0.0;
        for (std::size_t i = 0; i < 30; ++i) {
            const double c = proj.coords[2 * i + axis] - mean;
            var += c * c;
        }
        var /= 29.0;
        CHECK(var == doctest::Approx(proj.explained_variance[axis]).epsilon(1e-6));
    }
}

TEST_CASE("pca rejects degenerate input") {
    CHECK_THROWS_AS(pca_2d(std::vector<double>(4, 1.0), 2, 2), std::invalid_argument);
    CHECK_THROWS_AS(pca_2d(std::vector<double>(3, 1.0), 3, 1), std::invalid_argument);
    CHECK_THROWS_AS(pca_2d(std::vector<double>(6, 1.0), 3, 2), std::invalid_argument);  // zero variance
    std::vector<double> with_nan(20, 0.5);
    with_nan[7] = std::nan("");
    CHECK_THROWS_AS(pca_2d(with_nan, 5, 4), std::invalid_argument);
    CHECK_THROWS_AS(pca_2d(std::vector<double>(8, 1.0), 3, 2), std::invalid_argument);  // size mismatch
}

TEST_CASE("projection export carries type tags and six decimals") {
    auto store = testsup::store_from_lines({"a\tr\tb", "c\tr\tb"});
    const std::vector<double> data = {1.0, 0.0, 0.0, 1.0, -1.0, -1.0};
    auto proj = pca_2d(data, 3, 2);

    std::ostringstream out;
    export_projection(proj, *store.entities, {"drug", "gene", ""}, out);
    const std::string out_text = out.str();
    auto lines = split_on(out_text, '\n');
    CHECK(lines[0] == "entity,x,y,type");
    REQUIRE(lines.size() == 5);
    CHECK(lines[1].substr(0, 2) == "a,");
    CHECK(lines[1].find("drug") != std::string::npos);
    CHECK(lines[3].find("unknown") != std::string::npos);

    // coordinates round-trip at six decimals
    auto fields = split_on(lines[2], ',');
    REQUIRE(fields.size() == 4);
    CHECK(std::abs(std::stod(std::string(fields[1])) - proj.x(1)) < 5e-7);
    CHECK(std::abs(std::stod(std::string(fields[2])) - proj.y(1)) < 5e-7);

    std::ostringstream untyped;
    export_projection(proj, *store.entities, {}, untyped);
    const std::string untyped_text = untyped.str();
    for (std::size_t i = 1; i < 4; ++i)
        CHECK(split_on(untyped_text, '\n')[i].find("unknown") != std::string::npos);
}
