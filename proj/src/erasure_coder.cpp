#include "linc/erasure_coder.hpp"

#include <algorithm>
#include <bit>
#include <mutex>
#include <set>
#include <string>

#include "linc/error.hpp"

namespace linc {

namespace {

Bytes make_symbol(std::span<const std::uint8_t> payload, std::size_t symbol_len) {
  Bytes s(symbol_len, 0);
  s[0] = static_cast<std::uint8_t>(payload.size() >> 8);
  s[1] = static_cast<std::uint8_t>(payload.size() & 0xFF);
  std::copy(payload.begin(), payload.end(), s.begin() + 2);
  return s;
}

// In-place Gauss-Jordan inverse of a square matrix; false if singular.
bool invert(std::vector<gf::Element>& m, int dim) {
  std::vector<gf::Element> out(std::size_t(dim) * dim, 0);
  for (int i = 0; i < dim; ++i) out[std::size_t(i) * dim + i] = 1;
  auto at = [dim](std::vector<gf::Element>& v, int r, int c) -> gf::Element& {
    return v[std::size_t(r) * dim + c];
  };
  for (int col = 0; col < dim; ++col) {
    int pivot = col;
    while (pivot < dim && at(m, pivot, col) == 0) ++pivot;
    if (pivot == dim) return false;
    if (pivot != col) {
      for (int c = 0; c < dim; ++c) {
        std::swap(at(m, pivot, c), at(m, col, c));
        std::swap(at(out, pivot, c), at(out, col, c));
      }
    }
    const gf::Element scale = gf::inv(at(m, col, col));
    for (int c = 0; c < dim; ++c) {
      at(m, col, c) = gf::mul(at(m, col, c), scale);
      at(out, col, c) = gf::mul(at(out, col, c), scale);
    }
    for (int r = 0; r < dim; ++r) {
      const gf::Element f = at(m, r, col);
      if (r == col || f == 0) continue;
      for (int c = 0; c < dim; ++c) {
        at(m, r, c) ^= gf::mul(f, at(m, col, c));
        at(out, r, c) ^= gf::mul(f, at(out, col, c));
      }
    }
  }
  m.swap(out);
  return true;
}

}  // namespace

void CodingParams::validate() const {
  if (k <= 0) throw ParameterError("coding: k must be positive, got " + std::to_string(k));
  if (n < k) throw ParameterError("coding: n must be >= k, got k=" + std::to_string(k) + " n=" + std::to_string(n));
  if (n > kMaxN) throw ParameterError("coding: n must be <= 255 for GF(2^8), got " + std::to_string(n));
}

GeneratorMatrix build_generator(const CodingParams& params) {
  params.validate();
  const int k = params.k;
  const int n = params.n;

  // Vandermonde rows over the distinct nonzero points alpha^0 .. alpha^(n-1).
  GeneratorMatrix vander(n, k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) vander.at(i, j) = gf::exp(static_cast<unsigned>(i * j));

  std::vector<gf::Element> top(std::size_t(k) * k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) top[std::size_t(i) * k + j] = vander.at(i, j);
  if (!invert(top, k)) throw ParameterError("coding: singular Vandermonde block");  // unreachable for n <= 255

  GeneratorMatrix g(n, k);
  for (int i = 0; i < k; ++i) g.at(i, i) = 1;
  for (int i = k; i < n; ++i) {
    for (int j = 0; j < k; ++j) {
      gf::Element acc = 0;
      for (int t = 0; t < k; ++t) acc ^= gf::mul(vander.at(i, t), top[std::size_t(t) * k + j]);
      g.at(i, j) = acc;
    }
    int lead = 0;
    while (lead < k && g.at(i, lead) == 0) ++lead;
    if (lead < k) {
      const gf::Element s = gf::inv(g.at(i, lead));
      for (int j = 0; j < k; ++j) g.at(i, j) = gf::mul(g.at(i, j), s);
    }
  }
  return g;
}

const GeneratorMatrix& cached_generator(const CodingParams& params) {
  static std::mutex mu;
  static std::map<CodingParams, GeneratorMatrix> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(params);
  if (it == cache.end()) it = cache.emplace(params, build_generator(params)).first;
  return it->second;  // std::map nodes are stable
}

int index_bits(int n) {
  if (n <= 1) return 0;
  return std::bit_width(static_cast<unsigned>(n - 1));
}

std::size_t tag_wire_size(int n) { return 4 + (index_bits(n) + 7) / 8 + 2; }

Bytes serialize_tag(const CodedPacketTag& tag, int n) {
  if (n < 1 || n > CodingParams::kMaxN) throw ParameterError("tag: n out of range");
  if (tag.index >= n) throw UsageError("tag: index " + std::to_string(tag.index) + " >= n");
  Bytes out;
  out.reserve(tag_wire_size(n));
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(tag.block_id >> s));
  if (index_bits(n) > 0) out.push_back(static_cast<std::uint8_t>(tag.index));  // n <= 255: one byte
  out.push_back(static_cast<std::uint8_t>(tag.payload_len >> 8));
  out.push_back(static_cast<std::uint8_t>(tag.payload_len & 0xFF));
  return out;
}

CodedPacketTag parse_tag(std::span<const std::uint8_t> wire, int n) {
  if (n < 1 || n > CodingParams::kMaxN) throw ParameterError("tag: n out of range");
  if (wire.size() != tag_wire_size(n)) throw UsageError("tag: wrong wire size");
  CodedPacketTag tag;
  std::size_t pos = 0;
  for (int i = 0; i < 4; ++i) tag.block_id = (tag.block_id << 8) | wire[pos++];
  if (index_bits(n) > 0) tag.index = wire[pos++];
  if (tag.index >= n) throw UsageError("tag: index out of range");
  tag.payload_len = static_cast<std::uint16_t>((wire[pos] << 8) | wire[pos + 1]);
  return tag;
}

std::vector<CodedPacket> encode_block(const CodingParams& params, std::uint32_t block_id,
                                      std::span<const Bytes> payloads) {
  params.validate();
  if (static_cast<int>(payloads.size()) != params.k)
    throw UsageError("encode_block: expected " + std::to_string(params.k) + " payloads, got " +
                     std::to_string(payloads.size()));

  std::size_t max_len = 0;
  for (const auto& p : payloads) {
    if (p.size() > 0xFFFF) throw UsageError("encode_block: payload longer than 65535 bytes");
    max_len = std::max(max_len, p.size());
  }

  std::vector<CodedPacket> out;
  out.reserve(params.n);
  for (int i = 0; i < params.k; ++i)
    out.push_back({{block_id, static_cast<std::uint16_t>(i), static_cast<std::uint16_t>(payloads[i].size())},
                   payloads[i]});
  if (!params.coding_enabled()) return out;

  const std::size_t symbol_len = max_len + 2;
  std::vector<Bytes> symbols;
  symbols.reserve(params.k);
  for (const auto& p : payloads) symbols.push_back(make_symbol(p, symbol_len));

  const auto& g = cached_generator(params);
  for (int r = params.k; r < params.n; ++r) {
    Bytes parity(symbol_len, 0);
    for (int j = 0; j < params.k; ++j) gf::mul_add_region(parity, symbols[j], g.at(r, j));
    out.push_back({{block_id, static_cast<std::uint16_t>(r), static_cast<std::uint16_t>(symbol_len)},
                   std::move(parity)});
  }
  return out;
}

std::optional<std::vector<Bytes>> decode_block(const CodingParams& params,
                                               std::span<const CodedPacket> received) {
  params.validate();
  std::vector<const CodedPacket*> by_index(params.n, nullptr);
  for (const auto& p : received) {
    if (p.tag.index >= params.n)
      throw UsageError("decode_block: index " + std::to_string(p.tag.index) + " out of range");
    if (by_index[p.tag.index] != nullptr)
      throw UsageError("decode_block: duplicate index " + std::to_string(p.tag.index));
    by_index[p.tag.index] = &p;
  }
  if (static_cast<int>(received.size()) < params.k) return std::nullopt;

  std::vector<int> missing;
  for (int j = 0; j < params.k; ++j)
    if (by_index[j] == nullptr) missing.push_back(j);

  std::vector<Bytes> out(params.k);
  for (int j = 0; j < params.k; ++j)
    if (by_index[j] != nullptr) out[j] = by_index[j]->payload;
  if (missing.empty()) return out;

  std::vector<const CodedPacket*> parity;
  for (int r = params.k; r < params.n && parity.size() < missing.size(); ++r)
    if (by_index[r] != nullptr) parity.push_back(by_index[r]);

  const std::size_t symbol_len = parity.front()->payload.size();
  for (const auto* p : parity)
    if (p->payload.size() != symbol_len) throw UsageError("decode_block: parity packets differ in length");

  // Strip the known systematic contributions so only the missing columns remain.
  const auto& g = cached_generator(params);
  const int e = static_cast<int>(missing.size());
  std::vector<Bytes> rhs;
  rhs.reserve(e);
  for (const auto* p : parity) {
    Bytes r = p->payload;
    for (int j = 0; j < params.k; ++j) {
      if (by_index[j] == nullptr) continue;
      if (by_index[j]->payload.size() + 2 > symbol_len)
        throw UsageError("decode_block: systematic payload longer than the coded symbol");
      gf::mul_add_region(r, make_symbol(by_index[j]->payload, symbol_len), g.at(p->tag.index, j));
    }
    rhs.push_back(std::move(r));
  }

  std::vector<gf::Element> a(std::size_t(e) * e);
  for (int i = 0; i < e; ++i)
    for (int t = 0; t < e; ++t) a[std::size_t(i) * e + t] = g.at(parity[i]->tag.index, missing[t]);
  if (!invert(a, e)) throw UsageError("decode_block: singular system (generator is not MDS)");

  for (int t = 0; t < e; ++t) {
    Bytes symbol(symbol_len, 0);
    for (int i = 0; i < e; ++i) gf::mul_add_region(symbol, rhs[i], a[std::size_t(t) * e + i]);
    const std::size_t len = (std::size_t(symbol[0]) << 8) | symbol[1];
    if (len + 2 > symbol_len) throw UsageError("decode_block: recovered length exceeds symbol");
    out[missing[t]].assign(symbol.begin() + 2, symbol.begin() + 2 + static_cast<std::ptrdiff_t>(len));
  }
  return out;
}

std::vector<BlockDecoder::Recovered> BlockDecoder::add(const CodedPacket& packet) {
  if (decoded_) return {};
  if (packet.tag.index >= params_.n) throw UsageError("BlockDecoder: index out of range");
  if (!packets_.emplace(packet.tag.index, packet).second) return {};  // duplicate arrival
  if (received() < params_.k) return {};

  decoded_ = true;
  std::vector<CodedPacket> have;
  have.reserve(packets_.size());
  for (const auto& [idx, p] : packets_) have.push_back(p);
  auto data = decode_block(params_, have);

  std::vector<Recovered> out;
  for (int j = 0; j < params_.k; ++j)
    if (!packets_.contains(j)) out.push_back({j, std::move((*data)[j])});
  return out;
}

}  // namespace linc
