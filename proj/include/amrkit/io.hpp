#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "amrkit/tensor.hpp"

namespace amrkit::io {

// Little-endian float64 stream, independent of host byte order.
void append_f64_le(std::string& out, std::span<const double> values);
std::vector<double> read_f64_le(const std::string& bytes, std::size_t offset, std::size_t count);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

// Fixed two-decimal rendering used by every report file.
std::string fixed2(double value);
// Full-precision rendering that round-trips through strtod.
std::string exact(double value);

}  // namespace amrkit::io
