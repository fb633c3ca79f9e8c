#include "kge/model.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>

#include "kge/common.hpp"

namespace kge {

namespace {

void check_ids(const ModelParams& p, const Triple& t) {
    if (t.head < 0 || t.head >= p.n_entities || t.tail < 0 || t.tail >= p.n_entities ||
        t.relation < 0 || t.relation >= p.n_relations)
        throw std::out_of_range("triple id out of range for model");
}

double transe_score(std::span<const double> h, std::span<const double> r,
                    std::span<const double> t, bool l1) {
    double acc = 0.0;
    if (l1) {
        for (std::size_t i = 0; i < h.size(); ++i) acc += std::abs(h[i] + r[i] - t[i]);
    } else {
        for (std::size_t i = 0; i < h.size(); ++i) {
            double u = h[i] + r[i] - t[i];
            acc += u * u;
        }
        acc = std::sqrt(acc);
    }
    return -acc;
}

double distmult_score(std::span<const double> h, std::span<const double> r,
                      std::span<const double> t) {
    double acc = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) acc += h[i] * r[i] * t[i];
    return acc;
}

// Re(<h, r, conj(t)>) with rows laid out as [real | imaginary].
double complex_score(std::span<const double> h, std::span<const double> r,
                     std::span<const double> t, std::size_t d) {
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        acc += r[i] * h[i] * t[i];
        acc += r[i] * h[d + i] * t[d + i];
        acc += r[d + i] * h[i] * t[d + i];
        acc -= r[d + i] * h[d + i] * t[i];
    }
    return acc;
}

double hole_score(std::span<const double> h, std::span<const double> r,
                  std::span<const double> t) {
    const std::size_t d = h.size();
    double acc = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        double corr = 0.0;
        for (std::size_t i = 0; i < d; ++i) corr += h[i] * t[(i + k) % d];
        acc += r[k] * corr;
    }
    return acc;
}

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

ModelKind parse_model_kind(const std::string& name) {
    if (name == "transe" || name == "transe_l2") return ModelKind::TransE_L2;
    if (name == "transe_l1") return ModelKind::TransE_L1;
    if (name == "distmult") return ModelKind::DistMult;
    if (name == "complex") return ModelKind::ComplEx;
    if (name == "hole") return ModelKind::HolE;
    throw std::invalid_argument("unknown model kind: " + name);
}

std::string model_kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::TransE_L1: return "transe_l1";
        case ModelKind::TransE_L2: return "transe_l2";
        case ModelKind::DistMult: return "distmult";
        case ModelKind::ComplEx: return "complex";
        case ModelKind::HolE: return "hole";
    }
    throw std::invalid_argument("bad model kind");
}

int width_for(ModelKind kind, int dim) {
    return kind == ModelKind::ComplEx ? 2 * dim : dim;
}

ModelParams init_params(ModelKind kind, int dim, int64_t n_entities, int64_t n_relations,
                        uint64_t seed) {
    if (dim < 1) throw std::invalid_argument("init_params: dim must be >= 1");
    if (n_entities < 1 || n_relations < 1)
        throw std::invalid_argument("init_params: entity/relation counts must be >= 1");

    ModelParams p;
    p.kind = kind;
    p.dim = dim;
    p.width = width_for(kind, dim);
    p.n_entities = n_entities;
    p.n_relations = n_relations;
    p.entity.resize(static_cast<std::size_t>(n_entities) * p.width);
    p.relation.resize(static_cast<std::size_t>(n_relations) * p.width);

    const double bound = 6.0 / std::sqrt(static_cast<double>(dim));
    Rng rng(seed);
    for (double& v : p.entity) v = (2.0 * uniform_double(rng) - 1.0) * bound;
    for (double& v : p.relation) v = (2.0 * uniform_double(rng) - 1.0) * bound;
    return p;
}

double score(const ModelParams& params, const Triple& triple) {
    check_ids(params, triple);
    auto h = params.entity_row(triple.head);
    auto r = params.relation_row(triple.relation);
    auto t = params.entity_row(triple.tail);
    switch (params.kind) {
        case ModelKind::TransE_L1: return transe_score(h, r, t, true);
        case ModelKind::TransE_L2: return transe_score(h, r, t, false);
        case ModelKind::DistMult: return distmult_score(h, r, t);
        case ModelKind::ComplEx: return complex_score(h, r, t, static_cast<std::size_t>(params.dim));
        case ModelKind::HolE: return hole_score(h, r, t);
    }
    throw std::invalid_argument("bad model kind");
}

void score_all_tails(const ModelParams& params, int32_t head, int32_t relation,
                     std::vector<double>& out) {
    check_ids(params, Triple{head, relation, 0});
    const auto n = static_cast<std::size_t>(params.n_entities);
    const auto w = static_cast<std::size_t>(params.width);
    const auto d = static_cast<std::size_t>(params.dim);
    out.resize(n);
    auto h = params.entity_row(head);
    auto r = params.relation_row(relation);

    switch (params.kind) {
        case ModelKind::TransE_L1:
        case ModelKind::TransE_L2: {
            const bool l1 = params.kind == ModelKind::TransE_L1;
            std::vector<double> hr(w);
            for (std::size_t i = 0; i < w; ++i) hr[i] = h[i] + r[i];
            for (std::size_t e = 0; e < n; ++e) {
                const double* t = params.entity.data() + e * w;
                double acc = 0.0;
                if (l1) {
                    for (std::size_t i = 0; i < w; ++i) acc += std::abs(hr[i] - t[i]);
                } else {
                    for (std::size_t i = 0; i < w; ++i) {
                        double u = hr[i] - t[i];
                        acc += u * u;
                    }
                    acc = std::sqrt(acc);
                }
                out[e] = -acc;
            }
            return;
        }
        case ModelKind::DistMult: {
            std::vector<double> hr(w);
            for (std::size_t i = 0; i < w; ++i) hr[i] = h[i] * r[i];
            for (std::size_t e = 0; e < n; ++e)
                out[e] = dot(hr, params.entity_row(static_cast<int64_t>(e)));
            return;
        }
        case ModelKind::ComplEx: {
            // score = sum_i Re((h r)_i conj(t_i)) = <Re(hr), Re(t)> + <Im(hr), Im(t)>
            std::vector<double> hr(w);
            for (std::size_t i = 0; i < d; ++i) {
                hr[i] = h[i] * r[i] - h[d + i] * r[d + i];
                hr[d + i] = h[i] * r[d + i] + h[d + i] * r[i];
            }
            for (std::size_t e = 0; e < n; ++e)
                out[e] = dot(hr, params.entity_row(static_cast<int64_t>(e)));
            return;
        }
        case ModelKind::HolE: {
            // score = <t, h (x) r> where (x) is circular convolution:
            // coefficient of t_j is sum_i h_i r_{(j-i) mod d}.
            std::vector<double> coeff(d, 0.0);
            for (std::size_t j = 0; j < d; ++j) {
                double acc = 0.0;
                for (std::size_t i = 0; i < d; ++i) acc += h[i] * r[(j + d - i) % d];
                coeff[j] = acc;
            }
            for (std::size_t e = 0; e < n; ++e)
                out[e] = dot(coeff, params.entity_row(static_cast<int64_t>(e)));
            return;
        }
    }
    throw std::invalid_argument("bad model kind");
}

void score_all_heads(const ModelParams& params, int32_t relation, int32_t tail,
                     std::vector<double>& out) {
    check_ids(params, Triple{0, relation, tail});
    const auto n = static_cast<std::size_t>(params.n_entities);
    const auto w = static_cast<std::size_t>(params.width);
    const auto d = static_cast<std::size_t>(params.dim);
    out.resize(n);
    auto r = params.relation_row(relation);
    auto t = params.entity_row(tail);

    switch (params.kind) {
        case ModelKind::TransE_L1:
        case ModelKind::TransE_L2: {
            const bool l1 = params.kind == ModelKind::TransE_L1;
            std::vector<double> rt(w);
            for (std::size_t i = 0; i < w; ++i) rt[i] = r[i] - t[i];
            for (std::size_t e = 0; e < n; ++e) {
                const double* h = params.entity.data() + e * w;
                double acc = 0.0;
                if (l1) {
                    for (std::size_t i = 0; i < w; ++i) acc += std::abs(h[i] + rt[i]);
                } else {
                    for (std::size_t i = 0; i < w; ++i) {
                        double u = h[i] + rt[i];
                        acc += u * u;
                    }
                    acc = std::sqrt(acc);
                }
                out[e] = -acc;
            }
            return;
        }
        case ModelKind::DistMult: {
            std::vector<double> rt(w);
            for (std::size_t i = 0; i < w; ++i) rt[i] = r[i] * t[i];
            for (std::size_t e = 0; e < n; ++e)
                out[e] = dot(rt, params.entity_row(static_cast<int64_t>(e)));
            return;
        }
        case ModelKind::ComplEx: {
            // score = Re(<h, r conj(t)>); with b = r conj(t) the head picks up
            // <Re(h), Re(b)> - <Im(h), Im(b)>.
            std::vector<double> b(w);
            for (std::size_t i = 0; i < d; ++i) {
                b[i] = r[i] * t[i] + r[d + i] * t[d + i];
                b[d + i] = r[d + i] * t[i] - r[i] * t[d + i];
            }
            for (std::size_t e = 0; e < n; ++e) {
                const double* hrow = params.entity.data() + e * w;
                double acc = 0.0;
                for (std::size_t i = 0; i < d; ++i)
                    acc += hrow[i] * b[i] - hrow[d + i] * b[d + i];
                out[e] = acc;
            }
            return;
        }
        case ModelKind::HolE: {
            // coefficient of h_i is sum_k r_k t_{(i+k) mod d}  (r correlated with t)
            std::vector<double> coeff(d, 0.0);
            for (std::size_t i = 0; i < d; ++i) {
                double acc = 0.0;
                for (std::size_t k = 0; k < d; ++k) acc += r[k] * t[(i + k) % d];
                coeff[i] = acc;
            }
            for (std::size_t e = 0; e < n; ++e)
                out[e] = dot(coeff, params.entity_row(static_cast<int64_t>(e)));
            return;
        }
    }
    throw std::invalid_argument("bad model kind");
}

void accumulate_score_gradient(const ModelParams& params, const Triple& triple, double weight,
                               std::span<double> d_head, std::span<double> d_relation,
                               std::span<double> d_tail) {
    check_ids(params, triple);
    auto h = params.entity_row(triple.head);
    auto r = params.relation_row(triple.relation);
    auto t = params.entity_row(triple.tail);
    const auto w = static_cast<std::size_t>(params.width);
    const auto d = static_cast<std::size_t>(params.dim);

    switch (params.kind) {
        case ModelKind::TransE_L1: {
            // subgradient of -sum |u_i|, 0 at kinks
            for (std::size_t i = 0; i < w; ++i) {
                double g = -sgn(h[i] + r[i] - t[i]) * weight;
                d_head[i] += g;
                d_relation[i] += g;
                d_tail[i] -= g;
            }
            return;
        }
        case ModelKind::TransE_L2: {
            double norm = 0.0;
            for (std::size_t i = 0; i < w; ++i) {
                double u = h[i] + r[i] - t[i];
                norm += u * u;
            }
            norm = std::sqrt(norm);
            if (norm == 0.0) return;  // gradient of -||.|| at 0 taken as 0
            const double inv = weight / norm;
            for (std::size_t i = 0; i < w; ++i) {
                double g = -(h[i] + r[i] - t[i]) * inv;
                d_head[i] += g;
                d_relation[i] += g;
                d_tail[i] -= g;
            }
            return;
        }
        case ModelKind::DistMult: {
            for (std::size_t i = 0; i < w; ++i) {
                d_head[i] += weight * r[i] * t[i];
                d_relation[i] += weight * h[i] * t[i];
                d_tail[i] += weight * h[i] * r[i];
            }
            return;
        }
        case ModelKind::ComplEx: {
            for (std::size_t i = 0; i < d; ++i) {
                const double hr = h[i], hi = h[d + i];
                const double rr = r[i], ri = r[d + i];
                const double tr = t[i], ti = t[d + i];
                d_head[i] += weight * (rr * tr + ri * ti);
                d_head[d + i] += weight * (rr * ti - ri * tr);
                d_relation[i] += weight * (hr * tr + hi * ti);
                d_relation[d + i] += weight * (hr * ti - hi * tr);
                d_tail[i] += weight * (rr * hr - ri * hi);
                d_tail[d + i] += weight * (rr * hi + ri * hr);
            }
            return;
        }
        case ModelKind::HolE: {
            // score = sum_{k,i} r_k h_i t_{(i+k) mod d}
            for (std::size_t k = 0; k < d; ++k) {
                double corr = 0.0;
                for (std::size_t i = 0; i < d; ++i) corr += h[i] * t[(i + k) % d];
                d_relation[k] += weight * corr;
            }
            for (std::size_t i = 0; i < d; ++i) {
                double acc = 0.0;
                for (std::size_t k = 0; k < d; ++k) acc += r[k] * t[(i + k) % d];
                d_head[i] += weight * acc;
            }
            for (std::size_t j = 0; j < d; ++j) {
                double acc = 0.0;
                for (std::size_t i = 0; i < d; ++i) acc += h[i] * r[(j + d - i) % d];
                d_tail[j] += weight * acc;
            }
            return;
        }
    }
    throw std::invalid_argument("bad model kind");
}

ScoreGradient score_gradient(const ModelParams& params, const Triple& triple) {
    ScoreGradient g;
    g.head.assign(static_cast<std::size_t>(params.width), 0.0);
    g.relation.assign(static_cast<std::size_t>(params.width), 0.0);
    g.tail.assign(static_cast<std::size_t>(params.width), 0.0);
    accumulate_score_gradient(params, triple, 1.0, g.head, g.relation, g.tail);
    return g;
}

void circular_correlation(std::span<const double> a, std::span<const double> b,
                          std::span<double> out) {
    const std::size_t d = a.size();
    if (b.size() != d || out.size() != d)
        throw std::invalid_argument("circular_correlation: length mismatch");
    for (std::size_t k = 0; k < d; ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < d; ++i) acc += a[i] * b[(i + k) % d];
        out[k] = acc;
    }
}

void circular_correlation_fft(std::span<const double> a, std::span<const double> b,
                              std::span<double> out) {
    const std::size_t d = a.size();
    if (b.size() != d || out.size() != d)
        throw std::invalid_argument("circular_correlation_fft: length mismatch");
    // corr(a,b) = IFFT(conj(FFT(a)) . FFT(b)); FFTW planner is not thread safe.
    static std::mutex plan_mutex;
    const auto n = static_cast<int>(d);
    const std::size_t nc = d / 2 + 1;

    std::vector<double> in(d), res(d);
    std::vector<fftw_complex> fa(nc), fb(nc);

    fftw_plan fwd_a, fwd_b, bwd;
    {
        std::lock_guard<std::mutex> lock(plan_mutex);
        fwd_a = fftw_plan_dft_r2c_1d(n, in.data(), fa.data(), FFTW_ESTIMATE);
        fwd_b = fftw_plan_dft_r2c_1d(n, in.data(), fb.data(), FFTW_ESTIMATE);
        bwd = fftw_plan_dft_c2r_1d(n, fa.data(), res.data(), FFTW_ESTIMATE);
    }
    std::copy(a.begin(), a.end(), in.begin());
    fftw_execute_dft_r2c(fwd_a, in.data(), fa.data());
    std::copy(b.begin(), b.end(), in.begin());
    fftw_execute_dft_r2c(fwd_b, in.data(), fb.data());
    for (std::size_t i = 0; i < nc; ++i) {
        const double ar = fa[i][0], ai = fa[i][1];
        const double br = fb[i][0], bi = fb[i][1];
        fa[i][0] = ar * br + ai * bi;   // conj(fa) * fb
        fa[i][1] = ar * bi - ai * br;
    }
    fftw_execute_dft_c2r(bwd, fa.data(), res.data());
    for (std::size_t i = 0; i < d; ++i) out[i] = res[i] / static_cast<double>(d);
    {
        std::lock_guard<std::mutex> lock(plan_mutex);
        fftw_destroy_plan(fwd_a);
        fftw_destroy_plan(fwd_b);
        fftw_destroy_plan(bwd);
    }
}

namespace {

constexpr char kMagic[4] = {'K', 'G', 'E', '1'};

uint32_t kind_tag(ModelKind kind) {
    switch (kind) {
        case ModelKind::TransE_L1: return 1;
        case ModelKind::TransE_L2: return 2;
        case ModelKind::DistMult: return 3;
        case ModelKind::ComplEx: return 4;
        case ModelKind::HolE: return 5;
    }
    throw std::invalid_argument("bad model kind");
}

ModelKind kind_from_tag(uint32_t tag) {
    switch (tag) {
        case 1: return ModelKind::TransE_L1;
        case 2: return ModelKind::TransE_L2;
        case 3: return ModelKind::DistMult;
        case 4: return ModelKind::ComplEx;
        case 5: return ModelKind::HolE;
    }
    throw std::runtime_error("checkpoint: unknown model kind tag");
}

template <typename T>
void write_pod(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const char* what) {
    T value;
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw std::runtime_error(std::string("checkpoint: truncated reading ") + what);
    return value;
}

void write_labels(std::ostream& out, const Dictionary& dict) {
    write_pod<uint64_t>(out, static_cast<uint64_t>(dict.size()));
    for (const std::string& label : dict.labels()) {
        write_pod<uint32_t>(out, static_cast<uint32_t>(label.size()));
        out.write(label.data(), static_cast<std::streamsize>(label.size()));
    }
}

std::shared_ptr<Dictionary> read_labels(std::istream& in, uint64_t expected) {
    auto count = read_pod<uint64_t>(in, "label count");
    if (count != expected) throw std::runtime_error("checkpoint: label count mismatch");
    auto dict = std::make_shared<Dictionary>();
    for (uint64_t i = 0; i < count; ++i) {
        auto len = read_pod<uint32_t>(in, "label length");
        std::string label(len, '\0');
        in.read(label.data(), len);
        if (!in) throw std::runtime_error("checkpoint: truncated reading label");
        dict->add(label);
    }
    if (static_cast<uint64_t>(dict->size()) != expected)
        throw std::runtime_error("checkpoint: duplicate labels");
    return dict;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const Dictionary& entities,
                     const Dictionary& relations, const std::string& path) {
    if (entities.size() != params.n_entities || relations.size() != params.n_relations)
        throw std::invalid_argument("save_checkpoint: dictionary sizes do not match tables");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(kMagic, 4);
    write_pod<uint32_t>(out, kind_tag(params.kind));
    write_pod<uint32_t>(out, static_cast<uint32_t>(params.dim));
    write_pod<uint64_t>(out, static_cast<uint64_t>(params.n_entities));
    write_pod<uint64_t>(out, static_cast<uint64_t>(params.n_relations));
    out.write(reinterpret_cast<const char*>(params.entity.data()),
              static_cast<std::streamsize>(params.entity.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(params.relation.data()),
              static_cast<std::streamsize>(params.relation.size() * sizeof(double)));
    write_labels(out, entities);
    write_labels(out, relations);
    if (!out) throw std::runtime_error("write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);

    Checkpoint ckpt;
    ckpt.params.kind = kind_from_tag(read_pod<uint32_t>(in, "kind tag"));
    ckpt.params.dim = static_cast<int32_t>(read_pod<uint32_t>(in, "dim"));
    if (ckpt.params.dim < 1) throw std::runtime_error("checkpoint: bad dim");
    ckpt.params.width = width_for(ckpt.params.kind, ckpt.params.dim);
    ckpt.params.n_entities = static_cast<int64_t>(read_pod<uint64_t>(in, "entity count"));
    ckpt.params.n_relations = static_cast<int64_t>(read_pod<uint64_t>(in, "relation count"));
    if (ckpt.params.n_entities < 1 || ckpt.params.n_relations < 1)
        throw std::runtime_error("checkpoint: bad table sizes");

    auto read_table = [&](std::vector<double>& table, int64_t rows, const char* what) {
        table.resize(static_cast<std::size_t>(rows) * ckpt.params.width);
        in.read(reinterpret_cast<char*>(table.data()),
                static_cast<std::streamsize>(table.size() * sizeof(double)));
        if (!in) throw std::runtime_error(std::string("checkpoint: truncated reading ") + what);
    };
    read_table(ckpt.params.entity, ckpt.params.n_entities, "entity table");
    read_table(ckpt.params.relation, ckpt.params.n_relations, "relation table");

    ckpt.entities = read_labels(in, static_cast<uint64_t>(ckpt.params.n_entities));
    ckpt.relations = read_labels(in, static_cast<uint64_t>(ckpt.params.n_relations));
    return ckpt;
}

}  // namespace kge
