#include "linc/gf256.hpp"

#include <gtest/gtest.h>

#include <vector>

namespace linc::gf {
namespace {

TEST(Gf256, AdditionIsXor) {
  for (int a = 0; a < 256; ++a)
    for (int b = 0; b < 256; ++b) {
      EXPECT_EQ(add(a, b), a ^ b);
      EXPECT_EQ(sub(a, b), a ^ b);
    }
}

// Carry-less multiply reduced by x^8+x^4+x^3+x^2+1.
Element slow_mul(Element a, Element b) {
  unsigned r = 0, x = a;
  for (int i = 0; i < 8; ++i) {
    if (b & (1u << i)) r ^= x;
    x <<= 1;
    if (x & 0x100) x ^= 0x11D;
  }
  return static_cast<Element>(r);
}

TEST(Gf256, MultiplyMatchesShiftAndAdd) {
  for (int a = 0; a < 256; ++a)
    for (int b = 0; b < 256; ++b) ASSERT_EQ(mul(a, b), slow_mul(a, b)) << a << "*" << b;
}

TEST(Gf256, FieldAxiomsExhaustive) {
  for (int a = 0; a < 256; ++a) {
    EXPECT_EQ(mul(a, 1), a);
    EXPECT_EQ(mul(a, 0), 0);
    for (int b = 0; b < 256; ++b) {
      ASSERT_EQ(mul(a, b), mul(b, a));
      for (int c = 0; c < 256; c += 7) {
        ASSERT_EQ(mul(a, mul(b, c)), mul(mul(a, b), c));
        ASSERT_EQ(mul(a, add(b, c)), add(mul(a, b), mul(a, c)));
      }
    }
  }
}

TEST(Gf256, InverseAndDivision) {
  for (int a = 1; a < 256; ++a) {
    EXPECT_EQ(mul(a, inv(a)), 1);
    for (int b = 0; b < 256; ++b) ASSERT_EQ(mul(div(b, a), a), b);
  }
  EXPECT_THROW(inv(0), std::domain_error);
  EXPECT_THROW(div(1, 0), std::domain_error);
}

TEST(Gf256, GeneratorHasFullOrder) {
  std::vector<bool> seen(256, false);
  for (int e = 0; e < 255; ++e) {
    const auto v = exp(e);
    EXPECT_FALSE(seen[v]);
    seen[v] = true;
    EXPECT_EQ(log(v), e);
  }
  EXPECT_EQ(exp(255), 1);
  EXPECT_EQ(exp(8), 0x1D);
}

TEST(Gf256, PowMatchesRepeatedMultiply) {
  for (int a = 0; a < 256; a += 5) {
    Element acc = 1;
    for (int e = 0; e < 20; ++e) {
      EXPECT_EQ(pow(a, e), acc);
      acc = mul(acc, a);
    }
  }
}

TEST(Gf256, RegionOps) {
  std::vector<Element> src(300), dst(300), want(300);
  for (int i = 0; i < 300; ++i) src[i] = static_cast<Element>(i * 37 + 1), dst[i] = static_cast<Element>(i);
  for (int i = 0; i < 300; ++i) want[i] = add(dst[i], mul(src[i], 0x53));
  mul_add_region(dst, src, 0x53);
  EXPECT_EQ(dst, want);
  scale_region(dst, 0);
  EXPECT_EQ(dst, std::vector<Element>(300, 0));
}

static_assert(mul(2, 0x80) == 0x1D);

}  // namespace
}  // namespace linc::gf
