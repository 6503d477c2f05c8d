#include "base64.hpp"

#include <bit>
#include <cstdint>
#include <cstring>

#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>

#include "pidon/errors.hpp"

namespace pidon::detail {

namespace it = boost::archive::iterators;

std::string encode_f64(const double* data, std::size_t n) {
  std::string bytes(n * 8, '\0');
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(data[i]);
    for (int b = 0; b < 8; ++b) bytes[i * 8 + static_cast<std::size_t>(b)] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  using Enc = it::base64_from_binary<it::transform_width<std::string::const_iterator, 6, 8>>;
  std::string out(Enc(bytes.begin()), Enc(bytes.end()));
  out.append((3 - bytes.size() % 3) % 3, '=');
  return out;
}

std::vector<double> decode_f64(const std::string& text) {
  if (text.size() % 4 != 0) throw CorruptModel("base64 length is not a multiple of 4");
  std::size_t pad = 0;
  while (pad < text.size() && pad < 2 && text[text.size() - 1 - pad] == '=') ++pad;
  const std::size_t body = text.size() - pad;
  for (std::size_t i = 0; i < body; ++i) {
    const char c = text[i];
    const bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '+' ||
                    c == '/';
    if (!ok) throw CorruptModel("invalid base64 character");
  }
  const std::size_t n_bytes = text.size() / 4 * 3 - pad;
  if (n_bytes % 8 != 0) throw CorruptModel("base64 payload is not a whole number of f64 values");
  using Dec = it::transform_width<it::binary_from_base64<std::string::const_iterator>, 8, 6>;
  std::string bytes;
  bytes.reserve(n_bytes);
  Dec d(text.begin());
  for (std::size_t i = 0; i < n_bytes; ++i, ++d) bytes.push_back(static_cast<char>(*d));
  std::vector<double> out(n_bytes / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i * 8 + static_cast<std::size_t>(b)]))
              << (8 * b);
    }
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

}  // namespace pidon::detail
