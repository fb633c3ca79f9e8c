#include "kge/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "kge/common.hpp"

namespace kge {

namespace {

constexpr double kTolerance = 1e-10;
constexpr int kMaxIterations = 1000;

void mat_vec(const std::vector<double>& m, std::size_t n, std::span<const double> v,
             std::vector<double>& out) {
    out.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        const double* row = m.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) acc += row[j] * v[j];
        out[i] = acc;
    }
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

void fix_sign(std::vector<double>& v) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
    if (v[arg] < 0.0)
        for (double& x : v) x = -x;
}

// Dominant eigenpair of a symmetric PSD matrix; start vector drawn from a
// fixed-seed generator. `previous` is re-orthogonalized out every iteration.
std::pair<double, std::vector<double>> power_iterate(const std::vector<double>& cov, std::size_t n,
                                                     const std::vector<double>* previous,
                                                     double scale_hint) {
    Rng rng(0x5ca1ab1e);
    std::vector<double> v(n);
    for (double& x : v) x = 2.0 * uniform_double(rng) - 1.0;
    if (previous) {
        const double proj = dot(v, *previous);
        for (std::size_t i = 0; i < n; ++i) v[i] -= proj * (*previous)[i];
    }
    double len = norm2(v);
    if (len == 0.0) {
        v[0] = 1.0;
        len = 1.0;
    }
    for (double& x : v) x /= len;

    std::vector<double> next;
    for (int iter = 0; iter < kMaxIterations; ++iter) {
        mat_vec(cov, n, v, next);
        if (previous) {
            const double proj = dot(next, *previous);
            for (std::size_t i = 0; i < n; ++i) next[i] -= proj * (*previous)[i];
        }
        const double len_next = norm2(next);
        if (len_next <= scale_hint * 1e-14) {
            // Null direction: eigenvalue 0; pick a deterministic unit vector
            // orthogonal to `previous`.
            std::vector<double> u(n, 0.0);
            for (std::size_t j = 0; j < n; ++j) {
                std::fill(u.begin(), u.end(), 0.0);
                u[j] = 1.0;
                if (previous) {
                    const double proj = dot(u, *previous);
                    for (std::size_t i = 0; i < n; ++i) u[i] -= proj * (*previous)[i];
                }
                const double ulen = norm2(u);
                if (ulen > 0.5) {
                    for (double& x : u) x /= ulen;
                    return {0.0, std::move(u)};
                }
            }
            return {0.0, std::move(v)};
        }
        for (double& x : next) x /= len_next;
        double delta = 0.0;
        for (std::size_t i = 0; i < n; ++i) delta += (next[i] - v[i]) * (next[i] - v[i]);
        v.swap(next);
        if (std::sqrt(delta) < kTolerance) break;
    }

    mat_vec(cov, n, v, next);
    double eigenvalue = dot(v, next);  // Rayleigh quotient
    return {std::max(eigenvalue, 0.0), std::move(v)};
}

}  // namespace

Projection pca_2d(std::span<const double> data, std::size_t n_rows, std::size_t n_cols) {
    if (n_rows < 3) throw std::invalid_argument("pca_2d: need at least 3 rows");
    if (n_cols < 2) throw std::invalid_argument("pca_2d: need at least 2 columns");
    if (data.size() != n_rows * n_cols) throw std::invalid_argument("pca_2d: size mismatch");
    for (double v : data)
        if (!std::isfinite(v)) throw std::invalid_argument("pca_2d: nonfinite input");

    Projection proj;
    proj.n_rows = n_rows;
    proj.mean.assign(n_cols, 0.0);
    for (std::size_t i = 0; i < n_rows; ++i)
        for (std::size_t j = 0; j < n_cols; ++j) proj.mean[j] += data[i * n_cols + j];
    for (double& m : proj.mean) m /= static_cast<double>(n_rows);

    std::vector<double> centered(n_rows * n_cols);
    for (std::size_t i = 0; i < n_rows; ++i)
        for (std::size_t j = 0; j < n_cols; ++j)
            centered[i * n_cols + j] = data[i * n_cols + j] - proj.mean[j];

    // Sample covariance, n_cols x n_cols.
    std::vector<double> cov(n_cols * n_cols, 0.0);
    for (std::size_t i = 0; i < n_rows; ++i) {
        const double* row = centered.data() + i * n_cols;
        for (std::size_t a = 0; a < n_cols; ++a)
            for (std::size_t b = a; b < n_cols; ++b) cov[a * n_cols + b] += row[a] * row[b];
    }
    const double inv = 1.0 / static_cast<double>(n_rows - 1);
    for (std::size_t a = 0; a < n_cols; ++a)
        for (std::size_t b = a; b < n_cols; ++b) {
            cov[a * n_cols + b] *= inv;
            cov[b * n_cols + a] = cov[a * n_cols + b];
        }

    double trace = 0.0;
    for (std::size_t a = 0; a < n_cols; ++a) trace += cov[a * n_cols + a];
    if (trace <= 0.0) throw std::invalid_argument("pca_2d: input has zero variance");

    auto [ev1, axis1] = power_iterate(cov, n_cols, nullptr, trace);
    // Deflate the dominant component out of the covariance.
    std::vector<double> deflated = cov;
    for (std::size_t a = 0; a < n_cols; ++a)
        for (std::size_t b = 0; b < n_cols; ++b)
            deflated[a * n_cols + b] -= ev1 * axis1[a] * axis1[b];
    auto [ev2, axis2] = power_iterate(deflated, n_cols, &axis1, trace);

    if (ev2 > ev1) {
        std::swap(ev1, ev2);
        axis1.swap(axis2);
    }
    fix_sign(axis1);
    fix_sign(axis2);

    proj.explained_variance = {ev1, ev2};
    proj.axes = {axis1, axis2};
    proj.coords.resize(n_rows * 2);
    for (std::size_t i = 0; i < n_rows; ++i) {
        const double* row = centered.data() + i * n_cols;
        proj.coords[2 * i] = dot({row, n_cols}, axis1);
        proj.coords[2 * i + 1] = dot({row, n_cols}, axis2);
    }
    return proj;
}

void export_projection(const Projection& projection, const Dictionary& entities,
                       const std::vector<std::string>& types, std::ostream& out) {
    if (static_cast<std::size_t>(entities.size()) != projection.n_rows)
        throw std::invalid_argument("export_projection: entity count mismatch");
    out << "entity,x,y,type\n";
    char buf[64];
    for (std::size_t i = 0; i < projection.n_rows; ++i) {
        const std::string& type =
            i < types.size() && !types[i].empty() ? types[i] : std::string("unknown");
        std::snprintf(buf, sizeof(buf), ",%.6f,%.6f,", projection.x(i), projection.y(i));
        out << csv_field(entities.label(static_cast<int32_t>(i))) << buf << csv_field(type)
            << '\n';
    }
}

}  // namespace kge
