#include "aegis/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace aegis {

namespace {

constexpr char kMagic[4] = {'A', 'E', 'G', 'M'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_raw(std::ostream& out, const T& v) {
    static_assert(std::endian::native == std::endian::little);
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_raw(std::istream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (in.gcount() != sizeof(T)) throw Error(ErrorCode::Truncated, "checkpoint truncated");
}

} // namespace

void save_checkpoint(const std::string& path, ModelParams<float>& params) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path);

    out.write(kMagic, 4);
    write_raw(out, kVersion);
    write_raw(out, static_cast<uint32_t>(params.hyper.d));
    write_raw(out, static_cast<uint32_t>(params.hyper.d_h));
    write_raw(out, static_cast<uint32_t>(params.hyper.d_s));
    write_raw(out, static_cast<uint32_t>(params.hyper.n));
    write_raw(out, params.tvd.baseline_entropy);
    write_raw(out, params.tvd.tau_threshold);
    write_raw(out, params.tvd.lambda);
    for (int k = 0; k < 3; ++k) write_raw(out, params.stats.mu_log[k]);
    for (int k = 0; k < 3; ++k) write_raw(out, params.stats.sigma_log[k]);
    write_raw(out, NormStats::epsilon);

    params.visit([&out](const ModelParams<float>::TensorRef& t) {
        uint32_t name_len = static_cast<uint32_t>(std::strlen(t.name));
        write_raw(out, name_len);
        out.write(t.name, name_len);
        write_raw(out, static_cast<uint32_t>(t.rank));
        for (int r = 0; r < t.rank; ++r) write_raw(out, static_cast<uint32_t>(t.dims[r]));
        out.write(reinterpret_cast<const char*>(t.data),
                  static_cast<std::streamsize>(t.count * sizeof(float)));
    });
    if (!out) throw Error(ErrorCode::IoFailure, "short write: " + path);
}

ModelParams<float> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::CheckpointMissing, "cannot open " + path);

    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
        throw Error(ErrorCode::BadMagic, "not a checkpoint file: " + path);
    uint32_t version;
    read_raw(in, version);
    if (version != kVersion) throw Error(ErrorCode::VersionMismatch, "unsupported checkpoint version");

    Hyper hy;
    uint32_t v;
    read_raw(in, v);
    hy.d = static_cast<int>(v);
    read_raw(in, v);
    hy.d_h = static_cast<int>(v);
    read_raw(in, v);
    hy.d_s = static_cast<int>(v);
    read_raw(in, v);
    hy.n = static_cast<int>(v);

    ModelParams<float> params = ModelParams<float>::zeros(hy);
    read_raw(in, params.tvd.baseline_entropy);
    read_raw(in, params.tvd.tau_threshold);
    read_raw(in, params.tvd.lambda);
    for (int k = 0; k < 3; ++k) read_raw(in, params.stats.mu_log[k]);
    for (int k = 0; k < 3; ++k) read_raw(in, params.stats.sigma_log[k]);
    double eps;
    read_raw(in, eps);

    params.visit([&in](const ModelParams<float>::TensorRef& t) {
        uint32_t name_len;
        read_raw(in, name_len);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (in.gcount() != static_cast<std::streamsize>(name_len))
            throw Error(ErrorCode::Truncated, "checkpoint truncated");
        if (name != t.name)
            throw Error(ErrorCode::DimMismatch, "unexpected tensor '" + name + "', wanted '" +
                                                    t.name + "'");
        uint32_t rank;
        read_raw(in, rank);
        if (rank != static_cast<uint32_t>(t.rank))
            throw Error(ErrorCode::DimMismatch, "tensor rank mismatch for " + name);
        size_t count = rank == 0 ? 1 : 0;
        for (uint32_t r = 0; r < rank; ++r) {
            uint32_t dim;
            read_raw(in, dim);
            if (dim != static_cast<uint32_t>(t.dims[r]))
                throw Error(ErrorCode::DimMismatch, "tensor shape mismatch for " + name);
            count = r == 0 ? dim : count * dim;
        }
        if (count != t.count) throw Error(ErrorCode::DimMismatch, "tensor size mismatch for " + name);
        in.read(reinterpret_cast<char*>(t.data),
                static_cast<std::streamsize>(t.count * sizeof(float)));
        if (static_cast<size_t>(in.gcount()) != t.count * sizeof(float))
            throw Error(ErrorCode::Truncated, "checkpoint truncated in tensor " + name);
    });
    return params;
}

ModelParams<float> load_checkpoint(const std::string& path, const Hyper& expected) {
    ModelParams<float> p = load_checkpoint(path);
    if (!(p.hyper == expected))
        throw Error(ErrorCode::DimMismatch, "checkpoint hyperparameters do not match configuration");
    return p;
}

} // namespace aegis
