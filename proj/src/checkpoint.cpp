#include "modegan/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <istream>
#include <ostream>

#include "modegan/errors.hpp"

namespace modegan::checkpoint {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

template <class T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw IoError("checkpoint truncated");
    return v;
}

constexpr std::uint64_t kMaxDim = 1u << 24;

}  // namespace

void write_u32(std::ostream& out, std::uint32_t v) { put(out, v); }
std::uint32_t read_u32(std::istream& in) { return get<std::uint32_t>(in); }
void write_f64(std::ostream& out, double v) { put(out, v); }
double read_f64(std::istream& in) { return get<double>(in); }

void write_header(std::ostream& out, Kind kind) {
    out.write(kMagic.data(), kMagic.size());
    put(out, kVersion);
    put(out, static_cast<std::uint32_t>(kind));
}

Kind read_header(std::istream& in) {
    std::array<char, 8> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw IoError("not a modegan checkpoint (bad magic)");
    const auto version = get<std::uint32_t>(in);
    if (version != kVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
    const auto kind = get<std::uint32_t>(in);
    if (kind < 1 || kind > 3) throw IoError("unknown checkpoint kind " + std::to_string(kind));
    return static_cast<Kind>(kind);
}

void write_net(std::ostream& out, const DenseNet& net, Role role) {
    put(out, static_cast<std::uint32_t>(role));
    put(out, static_cast<std::uint32_t>(net.layer_dims().size()));
    for (std::size_t d : net.layer_dims()) put(out, static_cast<std::uint64_t>(d));
    for (const auto& a : net.activations()) {
        put(out, static_cast<std::uint8_t>(a.kind));
        put(out, a.slope);
    }
    for (auto block : net.parameter_blocks())
        out.write(reinterpret_cast<const char*>(block.data()), std::streamsize(block.size_bytes()));
}

DenseNet read_net(std::istream& in, Role expected) {
    const auto role = get<std::uint32_t>(in);
    if (role != static_cast<std::uint32_t>(expected))
        throw IoError("checkpoint holds network role " + std::to_string(role) + ", expected " +
                      std::to_string(static_cast<std::uint32_t>(expected)));
    const auto n_dims = get<std::uint32_t>(in);
    if (n_dims < 2 || n_dims > 64) throw IoError("corrupt checkpoint: layer count");
    std::vector<std::size_t> dims;
    for (std::uint32_t i = 0; i < n_dims; ++i) {
        const auto d = get<std::uint64_t>(in);
        if (d == 0 || d > kMaxDim) throw IoError("corrupt checkpoint: layer dimension");
        dims.push_back(static_cast<std::size_t>(d));
    }
    std::vector<Activation> acts;
    for (std::uint32_t i = 0; i + 1 < n_dims; ++i) {
        const auto kind = get<std::uint8_t>(in);
        const auto slope = get<double>(in);
        if (kind > static_cast<std::uint8_t>(ActivationKind::Sigmoid)) throw IoError("corrupt checkpoint: activation");
        acts.push_back({static_cast<ActivationKind>(kind), slope});
    }
    DenseNet net(std::move(dims), std::move(acts));
    for (auto block : net.parameter_blocks())
        if (!in.read(reinterpret_cast<char*>(block.data()), std::streamsize(block.size_bytes())))
            throw IoError("checkpoint truncated");
    return net;
}

void save(const std::filesystem::path& path, const DenseNet& net, Role role) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_header(out, Kind::Network);
    write_net(out, net, role);
    if (!out) throw IoError("write failed: " + path.string());
}

DenseNet load(const std::filesystem::path& path, Role expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    if (read_header(in) != Kind::Network) throw IoError(path.string() + " is not a single-network checkpoint");
    return read_net(in, expected);
}

}  // namespace modegan::checkpoint
