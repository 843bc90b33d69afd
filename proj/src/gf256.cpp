#include "linc/gf256.hpp"

#include <algorithm>
#include <stdexcept>

namespace linc::gf {

Element inv(Element a) {
  if (a == 0) throw std::domain_error("gf256: zero has no multiplicative inverse");
  return kTables.exp[kOrder - kTables.log[a]];
}

Element div(Element a, Element b) {
  if (b == 0) throw std::domain_error("gf256: division by zero");
  if (a == 0) return 0;
  return kTables.exp[kTables.log[a] + kOrder - kTables.log[b]];
}

Element pow(Element a, unsigned e) {
  if (e == 0) return 1;
  if (a == 0) return 0;
  return kTables.exp[(static_cast<unsigned long>(kTables.log[a]) * e) % kOrder];
}

void mul_add_region(std::span<std::uint8_t> dst, std::span<const std::uint8_t> src, Element c) {
  const std::size_t len = std::min(dst.size(), src.size());
  if (c == 0) return;
  if (c == 1) {
    for (std::size_t i = 0; i < len; ++i) dst[i] ^= src[i];
    return;
  }
  const unsigned lc = kTables.log[c];
  for (std::size_t i = 0; i < len; ++i) {
    if (src[i] != 0) dst[i] ^= kTables.exp[lc + kTables.log[src[i]]];
  }
}

void scale_region(std::span<std::uint8_t> buf, Element c) {
  for (auto& b : buf) b = mul(b, c);
}

}  // namespace linc::gf
