#include "flycl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "flycl/error.hpp"

namespace flycl {

namespace {

class Sink {
public:
    explicit Sink(std::ofstream& out) : out_(out) {}
    void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    void u32(std::uint32_t v) {
        unsigned char b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        bytes(b, 4);
    }
    void u64(std::uint64_t v) {
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        bytes(b, 8);
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

private:
    std::ofstream& out_;
};

class Source {
public:
    Source(std::ifstream& in, const std::filesystem::path& path) : in_(in), path_(path) {}
    void bytes(void* p, std::size_t n, const char* what) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            throw Error(Errc::TruncatedFile, path_.string() + ": file ends inside " + what + " at offset " +
                                                 std::to_string(offset_ + static_cast<std::size_t>(in_.gcount())));
        }
        offset_ += n;
    }
    std::uint32_t u32(const char* what) {
        unsigned char b[4];
        bytes(b, 4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        return v;
    }
    std::uint64_t u64(const char* what) {
        unsigned char b[8];
        bytes(b, 8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return v;
    }
    double f64(const char* what) { return std::bit_cast<double>(u64(what)); }

private:
    std::ifstream& in_;
    const std::filesystem::path& path_;
    std::size_t offset_ = 0;
};

}  // namespace

void write_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
    const RidgeState& st = checkpoint.state;
    const auto m = static_cast<Eigen::Index>(st.dim());
    if (static_cast<std::uint32_t>(m) != checkpoint.m || st.S.cols() != st.classes_seen ||
        checkpoint.class_ids.size() != st.classes_seen) {
        throw Error(Errc::DimensionMismatch, "checkpoint fields disagree with ridge state shape");
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
    Sink sink(out);
    sink.bytes("FLYS", 4);
    sink.u32(kFlysVersion);
    sink.u32(0);
    sink.u64(checkpoint.seed);
    sink.u32(checkpoint.m);
    sink.u32(checkpoint.d);
    sink.u32(checkpoint.p);
    sink.u32(checkpoint.k);
    sink.u32(st.classes_seen);
    sink.u64(st.tasks_seen);
    sink.u32(static_cast<std::uint32_t>(st.lambda_history.size()));
    for (double l : st.lambda_history) sink.f64(l);
    for (std::uint32_t c : checkpoint.class_ids) sink.u32(c);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) sink.f64(st.G(i, j));
    }
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < st.S.cols(); ++j) sink.f64(st.S(i, j));
    }
    if (!out) throw Error(Errc::IoError, "short write to " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
    Source src(in, path);
    char magic[4];
    src.bytes(magic, 4, "magic");
    if (std::memcmp(magic, "FLYS", 4) != 0) throw Error(Errc::BadMagic, path.string() + ": expected \"FLYS\" at offset 0");
    const std::uint32_t version = src.u32("version");
    if (version != kFlysVersion) {
        throw Error(Errc::VersionMismatch, path.string() + ": version " + std::to_string(version) + " at offset 4");
    }
    src.u32("flags");
    Checkpoint cp;
    cp.seed = src.u64("seed");
    cp.m = src.u32("m");
    cp.d = src.u32("d");
    cp.p = src.u32("p");
    cp.k = src.u32("k");
    const std::uint32_t classes = src.u32("classes_seen");
    const std::uint64_t tasks = src.u64("tasks_seen");
    const std::uint32_t num_lambdas = src.u32("num_lambdas");

    cp.state = RidgeState(cp.m);
    cp.state.classes_seen = classes;
    cp.state.tasks_seen = tasks;
    cp.state.lambda_history.reserve(num_lambdas);
    for (std::uint32_t i = 0; i < num_lambdas; ++i) cp.state.lambda_history.push_back(src.f64("lambda history"));
    cp.class_ids.reserve(classes);
    for (std::uint32_t i = 0; i < classes; ++i) cp.class_ids.push_back(src.u32("class ids"));
    const auto m = static_cast<Eigen::Index>(cp.m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double v = src.f64("G");
            cp.state.G(i, j) = v;
            cp.state.G(j, i) = v;
        }
    }
    cp.state.S.resize(m, classes);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < classes; ++j) cp.state.S(i, j) = src.f64("S");
    }
    if (!cp.state.lambda_history.empty() && classes > 0) {
        cp.state.C = solve_ridge_system(cp.state.G, cp.state.S, cp.state.lambda_history.back(), SolveMethod::Cholesky);
        cp.state.solved = true;
    }
    return cp;
}

}  // namespace flycl
