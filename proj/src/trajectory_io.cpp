#include "nso/trajectory_io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace nso {

std::string format_real(double x) {
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return {buf.data(), res.ptr};
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
    out << "step,eta,f_value,grad_est_norm,query_count\n";
    for (const auto& r : traj.records) {
        out << r.step << ',' << (r.eta ? format_real(*r.eta) : "") << ',' << format_real(r.f_value) << ','
            << (r.grad_est_norm ? format_real(*r.grad_est_norm) : "") << ',' << r.query_count << '\n';
    }
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_trajectory_csv(out, traj);
}

namespace {

constexpr std::array<char, 8> kMagic = {'N', 'S', 'O', 'T', 'R', 'A', 'J', '\0'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "replay format assumes a little-endian host");

template <class T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("replay file truncated");
    return v;
}

void put_vector(std::ostream& out, const Vector& v) {
    put<std::uint64_t>(out, v.dim());
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.dim() * sizeof(double)));
}

Vector get_vector(std::istream& in, std::uint64_t expected) {
    const auto n = get<std::uint64_t>(in);
    if (n != expected) throw std::runtime_error("replay file: dimension mismatch");
    Vector v(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw std::runtime_error("replay file truncated");
    return v;
}

}  // namespace

ReplayRecord make_replay_record(const Trajectory& traj) {
    if (traj.estimates.size() != traj.steps)
        throw std::invalid_argument("replay record needs the run's estimates (keep_estimates)");
    ReplayRecord rec;
    rec.method = traj.method;
    rec.k = traj.k;
    rec.mu = traj.mu;
    rec.provenance = traj.provenance;
    rec.initial = traj.initial;
    rec.etas = traj.etas;
    rec.estimates = traj.estimates;
    return rec;
}

void write_replay(const std::filesystem::path& path, const ReplayRecord& rec) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(kMagic.data(), kMagic.size());
    put<std::uint32_t>(out, kVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(rec.method.size()));
    out.write(rec.method.data(), static_cast<std::streamsize>(rec.method.size()));
    put<std::uint64_t>(out, rec.k);
    put<std::uint8_t>(out, rec.mu ? 1 : 0);
    put<double>(out, rec.mu.value_or(0.0));
    put<std::uint64_t>(out, rec.provenance.perturb_seed);
    put<std::uint64_t>(out, rec.provenance.perturb_stream);
    put<std::uint64_t>(out, rec.provenance.oracle_seed);
    put<std::uint64_t>(out, rec.provenance.oracle_stream);
    put_vector(out, rec.initial);
    put<std::uint64_t>(out, rec.etas.size());
    for (double e : rec.etas) put<double>(out, e);
    for (const auto& g : rec.estimates) put_vector(out, g);
}

ReplayRecord read_replay(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kMagic) throw std::runtime_error(path.string() + ": not a replay file");
    if (get<std::uint32_t>(in) != kVersion) throw std::runtime_error(path.string() + ": unsupported version");
    ReplayRecord rec;
    rec.method.resize(get<std::uint32_t>(in));
    in.read(rec.method.data(), static_cast<std::streamsize>(rec.method.size()));
    rec.k = get<std::uint64_t>(in);
    const bool has_mu = get<std::uint8_t>(in) != 0;
    const double mu = get<double>(in);
    if (has_mu) rec.mu = mu;
    rec.provenance.perturb_seed = get<std::uint64_t>(in);
    rec.provenance.perturb_stream = get<std::uint64_t>(in);
    rec.provenance.oracle_seed = get<std::uint64_t>(in);
    rec.provenance.oracle_stream = get<std::uint64_t>(in);
    const auto d = get<std::uint64_t>(in);
    rec.initial = Vector(d);
    in.read(reinterpret_cast<char*>(rec.initial.data()), static_cast<std::streamsize>(d * sizeof(double)));
    const auto steps = get<std::uint64_t>(in);
    rec.etas.resize(steps);
    for (auto& e : rec.etas) e = get<double>(in);
    rec.estimates.reserve(steps);
    for (std::uint64_t i = 0; i < steps; ++i) rec.estimates.push_back(get_vector(in, d));
    return rec;
}

std::vector<Vector> replay_iterates(const ReplayRecord& rec) {
    std::vector<Vector> out;
    out.reserve(rec.etas.size() + 1);
    Vector w = rec.initial;
    Vector m(w.dim());
    out.push_back(w);
    for (std::size_t i = 0; i < rec.etas.size(); ++i) {
        if (rec.mu) {
            m *= *rec.mu;
            m.axpy(-rec.etas[i], rec.estimates[i]);
            w += m;
        } else {
            w.axpy(-rec.etas[i], rec.estimates[i]);
        }
        out.push_back(w);
    }
    return out;
}

}  // namespace nso
