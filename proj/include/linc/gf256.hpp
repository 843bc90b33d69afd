#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace linc::gf {

// GF(2^8) with primitive polynomial x^8 + x^4 + x^3 + x^2 + 1 (0x11D) and
// generator 0x02.

using Element = std::uint8_t;

inline constexpr unsigned kPolynomial = 0x11D;
inline constexpr unsigned kOrder = 255;  // multiplicative group order

struct Tables {
  std::array<Element, 2 * kOrder> exp{};  // doubled so exp[log a + log b] needs no mod
  std::array<std::uint8_t, 256> log{};    // log[0] is unused
};

constexpr Tables make_tables() {
  Tables t;
  unsigned x = 1;
  for (unsigned i = 0; i < kOrder; ++i) {
    t.exp[i] = static_cast<Element>(x);
    t.exp[i + kOrder] = static_cast<Element>(x);
    t.log[x] = static_cast<std::uint8_t>(i);
    x <<= 1;
    if (x & 0x100) x ^= kPolynomial;
  }
  return t;
}

inline constexpr Tables kTables = make_tables();

constexpr Element add(Element a, Element b) { return a ^ b; }
constexpr Element sub(Element a, Element b) { return a ^ b; }

constexpr Element mul(Element a, Element b) {
  if (a == 0 || b == 0) return 0;
  return kTables.exp[kTables.log[a] + kTables.log[b]];
}

/// Multiplicative inverse; throws std::domain_error for zero.
Element inv(Element a);

/// a / b; throws std::domain_error when b is zero.
Element div(Element a, Element b);

/// alpha^e for the generator alpha = 0x02.
constexpr Element exp(unsigned e) { return kTables.exp[e % kOrder]; }

/// Discrete log base 0x02; undefined for zero.
constexpr unsigned log(Element a) { return kTables.log[a]; }

Element pow(Element a, unsigned e);

/// dst[i] ^= c * src[i] over min(dst, src) bytes.
void mul_add_region(std::span<std::uint8_t> dst, std::span<const std::uint8_t> src, Element c);

/// buf[i] = c * buf[i].
void scale_region(std::span<std::uint8_t> buf, Element c);

}  // namespace linc::gf
