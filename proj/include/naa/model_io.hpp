#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "naa/network.hpp"

namespace naa {

inline constexpr std::uint16_t kModelFormatVersion = 1;

/// Serializes to the NAAM format (see docs/formats.md). Parameters are stored
/// as little-endian f32 regardless of T.
template <typename T>
std::vector<std::uint8_t> encode_model(const Network<T>& model);

/// Parses NAAM bytes; every rejection is a FormatError naming the cause.
template <typename T>
Network<T> decode_model(std::span<const std::uint8_t> bytes);

template <typename T>
void write_model(const Network<T>& model, const std::string& path);

template <typename T>
Network<T> read_model(const std::string& path);

}  // namespace naa
