#include "nso/sensing.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "nso/kernels.hpp"

namespace nso {

std::vector<double> pack_symmetric(std::span<const double> m, std::size_t d) {
    if (m.size() != d * d) throw std::invalid_argument("pack_symmetric: expected d x d input");
    std::vector<double> out;
    out.reserve(packed_size(d));
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = a; b < d; ++b) out.push_back(m[a * d + b]);
    return out;
}

std::vector<double> pack_gram(std::span<const double> w, std::size_t d, std::size_t cols) {
    if (w.size() != d * cols) throw std::invalid_argument("pack_gram: shape mismatch");
    std::vector<double> out;
    out.reserve(packed_size(d));
    for (std::size_t a = 0; a < d; ++a) {
        const double* ra = w.data() + a * cols;
        for (std::size_t b = a; b < d; ++b) {
            const double* rb = w.data() + b * cols;
            double s = 0.0;
            for (std::size_t c = 0; c < cols; ++c) s += ra[c] * rb[c];
            out.push_back(s);
        }
    }
    return out;
}

MeasurementSet MeasurementSet::generate(std::size_t d, std::size_t n, RngStream& rng) {
    if (d == 0 || n == 0) throw std::invalid_argument("MeasurementSet: d and n must be >= 1");
    MeasurementSet set;
    set.d_ = d;
    set.n_ = n;
    set.full_.resize(n * d * d);
    for (double& x : set.full_) x = rng.normal();
    const std::size_t p = packed_size(d);
    set.packed_.resize(n * p);
    for (std::size_t i = 0; i < n; ++i) {
        const double* a = set.full_.data() + i * d * d;
        double* out = set.packed_.data() + i * p;
        std::size_t idx = 0;
        for (std::size_t r = 0; r < d; ++r) {
            out[idx++] = a[r * d + r];
            for (std::size_t c = r + 1; c < d; ++c) out[idx++] = a[r * d + c] + a[c * d + r];
        }
    }
    set.y_.assign(n, 0.0);
    return set;
}

std::vector<double> MeasurementSet::responses(std::span<const double> x_packed, bool parallel) const {
    std::vector<double> out(n_);
    if (parallel)
        kernels::parallel::row_dots(packed_, packed_size(d_), x_packed, out);
    else
        kernels::serial::row_dots(packed_, packed_size(d_), x_packed, out);
    return out;
}

void MeasurementSet::set_targets_from_factor(std::span<const double> u, std::size_t r) {
    // Same packed dot path as the loss, so the residual at the truth is exactly zero.
    y_ = responses(pack_gram(u, d_, r), false);
}

Vector SensingInstance::padded_truth() const {
    Vector w(d * d);
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t c = 0; c < r; ++c) w[a * d + c] = u_star[a * r + c];
    return w;
}

std::shared_ptr<const MeasurementSet> SensingInstance::fresh_measurements(std::size_t count,
                                                                          std::uint64_t index) const {
    RngStream rng = RngStream(seed, stream_id).child("holdout", index);
    auto set = MeasurementSet::generate(d, count, rng);
    set.set_targets_from_factor(u_star, r);
    return std::make_shared<const MeasurementSet>(std::move(set));
}

SensingInstance make_sensing_instance(std::size_t d, std::size_t r, std::size_t n, const RngStream& rng) {
    if (d == 0) throw std::invalid_argument("matrix_sensing: d must be >= 1");
    if (r < 1 || r > d) throw std::invalid_argument("matrix_sensing: rank must satisfy 1 <= r <= d");
    if (n < 1) throw std::invalid_argument("matrix_sensing: need at least one measurement");
    const RngStream root(rng.seed(), rng.stream_id());
    SensingInstance inst;
    inst.d = d;
    inst.r = r;
    inst.n = n;
    inst.seed = rng.seed();
    inst.stream_id = rng.stream_id();
    RngStream truth = root.child("truth", 0);
    inst.u_star.resize(d * r);
    for (double& x : inst.u_star) x = truth.normal();
    RngStream meas = root.child("train", 0);
    auto set = MeasurementSet::generate(d, n, meas);
    set.set_targets_from_factor(inst.u_star, r);
    inst.train = std::make_shared<const MeasurementSet>(std::move(set));
    return inst;
}

SensingObjective::SensingObjective(std::shared_ptr<const MeasurementSet> data, KernelMode mode)
    : data_(std::move(data)), mode_(mode) {
    if (!data_) throw std::invalid_argument("SensingObjective: null measurement set");
    d_ = data_->d();
    const std::size_t p = packed_size(d_);
    const std::size_t n = data_->size();
    if (2 * p >= 3 * n) return;
    // Transpose K so each Gram entry is a contiguous dot product; the entry
    // (a, b) and (b, a) come from the same products, so the matrix is exactly symmetric.
    std::vector<double> kt(p * n);
    const auto rows = data_->packed_rows();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < p; ++a) kt[a * n + i] = rows[i * p + a];
    gram_.resize(p * p);
    gram_rhs_.resize(p);
    const bool parallel = mode_ == KernelMode::Parallel;
    const std::span<const double> kt_span(kt);
    for (std::size_t a = 0; a < p; ++a) {
        const std::span<const double> col(kt.data() + a * n, n);
        const std::span<double> out(gram_.data() + a * p, p);
        if (parallel)
            kernels::parallel::row_dots(kt_span, n, col, out);
        else
            kernels::serial::row_dots(kt_span, n, col, out);
    }
    if (parallel)
        kernels::parallel::row_dots(kt_span, n, data_->targets(), gram_rhs_);
    else
        kernels::serial::row_dots(kt_span, n, data_->targets(), gram_rhs_);
}

double SensingObjective::lipschitz() const { return std::numeric_limits<double>::infinity(); }

std::vector<double> SensingObjective::residuals(const Vector& w) const {
    check_dim(w, "residuals");
    auto out = data_->responses(pack_gram(w.span(), d_, d_), mode_ == KernelMode::Parallel);
    const auto& y = data_->targets();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
    return out;
}

double SensingObjective::value(const Vector& w) const {
    const auto r = residuals(w);
    double s = 0.0;
    for (double x : r) s += x * x;
    return s / (2.0 * static_cast<double>(r.size()));
}

double SensingObjective::mse(const Vector& w) const { return 2.0 * value(w); }

std::vector<double> SensingObjective::weighted_sum(std::span<const double> weights) const {
    std::vector<double> packed(packed_size(d_));
    if (mode_ == KernelMode::Parallel)
        kernels::parallel::weighted_row_sum(data_->packed_rows(), packed.size(), weights, packed);
    else
        kernels::serial::weighted_row_sum(data_->packed_rows(), packed.size(), weights, packed);
    return unpack_weighted(packed);
}

std::vector<double> SensingObjective::unpack_weighted(std::span<const double> packed_sum) const {
    // Packed rows hold A_ab + A_ba off the diagonal, i.e. twice sym(A).
    std::vector<double> m(d_ * d_);
    std::size_t idx = 0;
    for (std::size_t a = 0; a < d_; ++a) {
        m[a * d_ + a] = packed_sum[idx++];
        for (std::size_t b = a + 1; b < d_; ++b) {
            const double v = 0.5 * packed_sum[idx++];
            m[a * d_ + b] = v;
            m[b * d_ + a] = v;
        }
    }
    return m;
}

namespace {

// out += scale * M X for d x d row-major matrices.
void add_product(std::span<const double> m, std::span<const double> x, std::size_t d, double scale,
                 std::span<double> out) {
    for (std::size_t a = 0; a < d; ++a) {
        double* row = out.data() + a * d;
        for (std::size_t b = 0; b < d; ++b) {
            const double coef = scale * m[a * d + b];
            if (coef == 0.0) continue;
            const double* xr = x.data() + b * d;
            for (std::size_t c = 0; c < d; ++c) row[c] += coef * xr[c];
        }
    }
}

}  // namespace

Vector SensingObjective::gradient(const Vector& w) const {
    check_dim(w, "gradient");
    std::vector<double> m;
    if (uses_gram()) {
        // K^T (K x - y) = (K^T K) x - K^T y
        const auto x = pack_gram(w.span(), d_, d_);
        std::vector<double> packed(x.size());
        if (mode_ == KernelMode::Parallel)
            kernels::parallel::row_dots(gram_, x.size(), x, packed);
        else
            kernels::serial::row_dots(gram_, x.size(), x, packed);
        for (std::size_t a = 0; a < packed.size(); ++a) packed[a] -= gram_rhs_[a];
        m = unpack_weighted(packed);
    } else {
        m = weighted_sum(residuals(w));
    }
    Vector g(dim());
    add_product(m, w.span(), d_, 2.0 / static_cast<double>(data_->size()), g.span());
    return g;
}

Vector SensingObjective::hvp(const Vector& w, const Vector& v) const {
    check_dim(v, "hvp");
    const auto r = residuals(w);
    // c_i = <A_i, W V^T + V W^T>
    std::vector<double> cross(packed_size(d_));
    std::size_t idx = 0;
    for (std::size_t a = 0; a < d_; ++a) {
        for (std::size_t b = a; b < d_; ++b) {
            double s = 0.0;
            for (std::size_t c = 0; c < d_; ++c) s += w[a * d_ + c] * v[b * d_ + c] + v[a * d_ + c] * w[b * d_ + c];
            cross[idx++] = s;
        }
    }
    const auto c = data_->responses(cross, mode_ == KernelMode::Parallel);
    const double scale = 2.0 / static_cast<double>(r.size());
    Vector out(dim());
    add_product(weighted_sum(c), w.span(), d_, scale, out.span());
    add_product(weighted_sum(r), v.span(), d_, scale, out.span());
    return out;
}

double SensingObjective::hessian_trace(const Vector& w) const {
    const auto r = residuals(w);
    const std::size_t n = r.size();
    const double dd = static_cast<double>(d_);
    auto term = [&](std::size_t i) {
        const auto full = data_->full(i);
        double fro = 0.0;
        double tr = 0.0;
        for (std::size_t a = 0; a < d_; ++a) {
            tr += full[a * d_ + a];
            for (std::size_t c = 0; c < d_; ++c) {
                double s = 0.0;
                for (std::size_t b = 0; b < d_; ++b)
                    s += 0.5 * (full[a * d_ + b] + full[b * d_ + a]) * w[b * d_ + c];
                fro += s * s;
            }
        }
        return 4.0 * fro + 2.0 * r[i] * dd * tr;
    };
    const double total = mode_ == KernelMode::Parallel ? kernels::parallel::reduce_sum(n, term)
                                                       : kernels::serial::reduce_sum(n, term);
    return total / static_cast<double>(n);
}

MatrixSensing make_matrix_sensing(std::size_t d, std::size_t r, std::size_t n, const RngStream& rng,
                                  KernelMode mode) {
    MatrixSensing out;
    out.instance = make_sensing_instance(d, r, n, rng);
    out.objective = std::make_shared<const SensingObjective>(out.instance.train, mode);
    return out;
}

double sensing_trace_formula(const MeasurementSet& data, const Vector& w) {
    const std::size_t d = data.d();
    if (w.dim() != d * d) throw std::invalid_argument("sensing_trace_formula: W must be d x d");
    auto term = [&](std::size_t i) {
        const auto a = data.full(i);
        double fro = 0.0;
        for (std::size_t row = 0; row < d; ++row) {
            for (std::size_t c = 0; c < d; ++c) {
                double s = 0.0;
                for (std::size_t b = 0; b < d; ++b) s += a[row * d + b] * w[b * d + c];
                fro += s * s;
            }
        }
        return fro;
    };
    return kernels::parallel::reduce_sum(data.size(), term) / static_cast<double>(data.size());
}

double sensing_trace_deviation(const MeasurementSet& data, const Vector& w) {
    const double target = static_cast<double>(data.d()) * w.squared_norm();
    if (target == 0.0) throw std::invalid_argument("sensing_trace_deviation: W must be nonzero");
    return std::abs(sensing_trace_formula(data, w) - target) / target;
}

void save_sensing_instance(const SensingInstance& inst, const std::filesystem::path& path) {
    nlohmann::json j;
    j["d"] = inst.d;
    j["r"] = inst.r;
    j["n"] = inst.n;
    j["seed"] = inst.seed;
    j["stream_id"] = inst.stream_id;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

SensingInstance load_sensing_instance(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
    for (const auto& [key, _] : j.items())
        if (key != "d" && key != "r" && key != "n" && key != "seed" && key != "stream_id")
            throw std::invalid_argument(path.string() + ": unknown field '" + key + "'");
    const RngStream rng(j.at("seed").get<std::uint64_t>(), j.at("stream_id").get<std::uint64_t>());
    return make_sensing_instance(j.at("d").get<std::size_t>(), j.at("r").get<std::size_t>(),
                                 j.at("n").get<std::size_t>(), rng);
}

}  // namespace nso
