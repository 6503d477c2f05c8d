#pragma once

// Base64 of little-endian f64 arrays, used by the model file.

#include <string>
#include <vector>

namespace pidon::detail {

std::string encode_f64(const double* data, std::size_t n);
/// Throws CorruptModel on malformed text or a length that is not a whole
/// number of doubles.
std::vector<double> decode_f64(const std::string& text);

}  // namespace pidon::detail
