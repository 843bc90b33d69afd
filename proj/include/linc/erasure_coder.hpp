#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "linc/gf256.hpp"

namespace linc {

using Bytes = std::vector<std::uint8_t>;

/// (k, n) block-code configuration: k data packets per block, n packets sent.
struct CodingParams {
  int k = 1;
  int n = 1;

  static constexpr int kMaxN = 255;

  /// Throws ParameterError unless 0 < k <= n <= 255.
  void validate() const;
  int parity() const { return n - k; }
  double rate() const { return static_cast<double>(n) / k; }
  bool coding_enabled() const { return n > k; }

  friend bool operator==(const CodingParams&, const CodingParams&) = default;
  friend auto operator<=>(const CodingParams&, const CodingParams&) = default;
};

/// Row-major n x k matrix over GF(2^8); rows 0..k-1 form the identity.
class GeneratorMatrix {
 public:
  GeneratorMatrix(int rows, int cols) : rows_(rows), cols_(cols), data_(std::size_t(rows) * cols, 0) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  gf::Element at(int r, int c) const { return data_[std::size_t(r) * cols_ + c]; }
  gf::Element& at(int r, int c) { return data_[std::size_t(r) * cols_ + c]; }
  std::span<const gf::Element> row(int r) const { return {data_.data() + std::size_t(r) * cols_, std::size_t(cols_)}; }

  friend bool operator==(const GeneratorMatrix&, const GeneratorMatrix&) = default;

 private:
  int rows_;
  int cols_;
  std::vector<gf::Element> data_;
};

/// Systematic MDS generator for (k, n).
///
/// Starts from the n x k Vandermonde matrix V[i][j] = alpha^(i*j), multiplies
/// by the inverse of its top k x k block so the systematic rows become the
/// identity, then scales every parity row so its first nonzero coefficient
/// is 1. Any k rows of the result are invertible.
GeneratorMatrix build_generator(const CodingParams& params);

/// Cached generator for repeated use by the simulator; thread-safe.
const GeneratorMatrix& cached_generator(const CodingParams& params);

struct CodedPacketTag {
  std::uint32_t block_id = 0;
  std::uint16_t index = 0;        // < k: systematic, >= k: parity
  std::uint16_t payload_len = 0;  // systematic: original length; parity: coded symbol length

  bool is_systematic(const CodingParams& p) const { return index < p.k; }
  friend bool operator==(const CodedPacketTag&, const CodedPacketTag&) = default;
};

/// Number of bits used to carry the in-block index: ceil(log2(n)).
int index_bits(int n);

/// block_id (32-bit BE) | index (index_bits(n) bits, byte-padded, BE) | payload_len (16-bit BE).
Bytes serialize_tag(const CodedPacketTag& tag, int n);
CodedPacketTag parse_tag(std::span<const std::uint8_t> wire, int n);
std::size_t tag_wire_size(int n);

struct CodedPacket {
  CodedPacketTag tag;
  Bytes payload;
};

/// Encode one block of exactly k payloads into n packets.
///
/// Outputs 0..k-1 are the inputs, byte for byte. Parity payloads are linear
/// combinations of the coding symbols (2-byte big-endian length followed by
/// the payload, zero-padded to the longest symbol), so decode can restore
/// each lost payload's exact length.
std::vector<CodedPacket> encode_block(const CodingParams& params, std::uint32_t block_id,
                                      std::span<const Bytes> payloads);

/// Recover the k data payloads from any k distinct packets of a block.
///
/// Returns std::nullopt (unrecoverable) with fewer than k packets. Systematic
/// packets are never transformed; only the missing ones are solved for.
/// Throws UsageError for duplicate or out-of-range indices.
std::optional<std::vector<Bytes>> decode_block(const CodingParams& params,
                                               std::span<const CodedPacket> received);

/// Per-block receive state at the decoding switch.
class BlockDecoder {
 public:
  explicit BlockDecoder(CodingParams params) : params_(params) {}

  struct Recovered {
    int index;
    Bytes payload;
  };

  /// Record one packet. Decoding runs exactly once, when the count first
  /// reaches k; the return value then holds the systematic packets that had
  /// not arrived. Packets arriving after that are ignored.
  std::vector<Recovered> add(const CodedPacket& packet);

  int received() const { return static_cast<int>(packets_.size()); }
  bool decoded() const { return decoded_; }
  bool has(int index) const { return packets_.contains(index); }

 private:
  CodingParams params_;
  std::map<int, CodedPacket> packets_;
  bool decoded_ = false;
};

}  // namespace linc
