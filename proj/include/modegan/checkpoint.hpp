#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "modegan/dense_net.hpp"

namespace modegan::checkpoint {

// Layout (all integers and doubles little-endian):
//   magic[8] = "MODEGAN\x01", u32 format version, u32 container kind,
//   kind-specific header fields, then one record per network:
//   u32 role, u32 dim count, u64 dims..., per layer (u8 activation, f64 slope),
//   then every parameter block as raw f64 in (weights, bias) per-layer order.
inline constexpr std::array<char, 8> kMagic = {'M', 'O', 'D', 'E', 'G', 'A', 'N', '\x01'};
inline constexpr std::uint32_t kVersion = 1;

enum class Kind : std::uint32_t { Network = 1, AutoEncoder = 2, Gan = 3 };
enum class Role : std::uint32_t { Generic = 0, Encoder = 1, Decoder = 2, Generator = 3, Discriminator = 4 };

void write_header(std::ostream& out, Kind kind);
/// Validates magic and version; returns the container kind.
Kind read_header(std::istream& in);

void write_u32(std::ostream& out, std::uint32_t v);
std::uint32_t read_u32(std::istream& in);
void write_f64(std::ostream& out, double v);
double read_f64(std::istream& in);

void write_net(std::ostream& out, const DenseNet& net, Role role);
/// Throws IoError if the stored role differs from `expected`.
DenseNet read_net(std::istream& in, Role expected);

void save(const std::filesystem::path& path, const DenseNet& net, Role role = Role::Generic);
DenseNet load(const std::filesystem::path& path, Role expected = Role::Generic);

}  // namespace modegan::checkpoint
