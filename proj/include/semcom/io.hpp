#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace semcom::io {

namespace fs = std::filesystem;

std::uint32_t crc32(std::span<const unsigned char> bytes);

// Little-endian encodings independent of the host byte order.
std::vector<unsigned char> encode_f64(std::span<const double> values);
std::vector<unsigned char> encode_f32(std::span<const float> values);
std::vector<double> decode_f64(std::span<const unsigned char> bytes);
std::vector<float> decode_f32(std::span<const unsigned char> bytes);

std::vector<unsigned char> read_bytes(const fs::path& path);
// Writes to a sibling temporary and renames into place.
void write_bytes_atomic(const fs::path& path, std::span<const unsigned char> bytes);
std::string read_text(const fs::path& path);
void write_text_atomic(const fs::path& path, const std::string& text);

std::string hex32(std::uint32_t v);

}  // namespace semcom::io
