#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "linc/erasure_coder.hpp"
#include "linc/rng.hpp"
#include "linc/topology.hpp"

namespace linc {

// ---------------------------------------------------------------------------
// Event queue

/// Min-heap on (time, insertion order): equal-time events pop FIFO.
template <typename Payload>
class EventQueue {
 public:
  struct Entry {
    double time;
    std::uint64_t order;
    Payload payload;
  };

  void push(double time, Payload payload) {
    heap_.push_back({time, next_order_++, std::move(payload)});
    std::push_heap(heap_.begin(), heap_.end(), later);
  }

  Entry pop() {
    std::pop_heap(heap_.begin(), heap_.end(), later);
    Entry e = std::move(heap_.back());
    heap_.pop_back();
    return e;
  }

  double next_time() const { return heap_.front().time; }
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }

 private:
  static bool later(const Entry& x, const Entry& y) {
    return x.time > y.time || (x.time == y.time && x.order > y.order);
  }
  std::vector<Entry> heap_;
  std::uint64_t next_order_ = 0;
};

// ---------------------------------------------------------------------------
// Building blocks

/// Poisson packet source: exponential gaps with mean 1/lambda.
class PoissonSource {
 public:
  PoissonSource(double lambda, std::uint64_t seed);
  double next_gap();
  double lambda() const { return gap_.lambda(); }

 private:
  Rng rng_;
  std::exponential_distribution<double> gap_;
};

/// One direction of a link: FIFO server followed by a propagation delay.
class Channel {
 public:
  Channel(double rate_bps, double latency_s) : rate_bps_(rate_bps), latency_s_(latency_s) {}

  struct Schedule {
    double departure;  // last bit leaves the head end
    double arrival;    // packet reaches the far end
  };

  /// Enqueue `bytes` at time `now`; departure = max(now, previous departure) + service.
  Schedule transmit(double now, std::uint32_t bytes);
  double service_time(std::uint32_t bytes) const { return bytes * 8.0 / rate_bps_; }
  double busy_until() const { return busy_until_; }

 private:
  double rate_bps_;
  double latency_s_;
  double busy_until_ = 0.0;
};

enum class PacketKind : std::uint8_t { kData, kCoded, kAck };

struct Packet {
  PacketKind kind = PacketKind::kData;
  std::uint32_t flow = 0;
  std::uint64_t seq = 0;
  double created_at = 0.0;  // first creation at the sender; kept across retransmissions
  double sent_at = 0.0;     // this transmission
  std::uint32_t tx = 1;     // transmission number of this copy
  std::uint32_t size = 0;
  std::uint32_t hop = 0;    // index of the hop being traversed
  std::optional<CodedPacketTag> tag;
  Bytes coded_payload;      // parity packets only
  // ACK fields: everything below `cum_ack` has arrived; `trigger_*` is the data copy that caused it.
  std::uint64_t cum_ack = 0;
  std::uint64_t trigger_seq = 0;
  double trigger_sent_at = 0.0;
};

/// Identity of a data packet as carried through the erasure code.
Bytes packet_identity(const Packet& p);
Packet packet_from_identity(std::span<const std::uint8_t> bytes);

// ---------------------------------------------------------------------------
// Configuration and results

enum class TraceKind {
  kCreated,      // original transmission left the sender
  kRetransmit,   // sender re-sent after dup ACKs
  kTimeout,      // sender re-sent after the retransmission timer
  kErased,       // lost on the lossy link
  kRecovered,    // regenerated by the decoder
  kBlockDecoded, // a block reached k packets at the decoder
  kBlockAbandoned,
  kArrived,      // copy reached the receiver (any order)
  kDelivered,    // handed to the application in order
  kAckReceived,
};

struct TraceEvent {
  double time;
  TraceKind kind;
  std::uint32_t flow;
  std::uint64_t seq;
  std::uint32_t block_id;
  PacketKind packet_kind;
};

struct SimConfig {
  Topology topology;
  std::vector<RoutedFlow> flows;
  CodingParams coding{1, 1};
  bool linc_enabled = true;      // false: no tags, no coding at all
  std::uint32_t packet_bytes = kDefaultPacketBytes;
  std::uint32_t ack_bytes = 64;
  double duration_s = 10.0;      // sources stop at this time
  std::optional<double> warmup_s;   // default: 10% of duration
  std::optional<double> drain_s;    // extra time to let retransmissions finish; default 20 x max RTT
  std::uint64_t seed = 1;
  double rto_multiplier = 3.0;      // retransmission timer = multiplier x base RTT
  int dupack_threshold = 3;
  double reorder_window_rtt = 0.25; // wait this fraction of base RTT after the 3rd dup ACK
  bool ack_lossy = false;

  /// Optional per-flow emission times replacing the Poisson sources (tests).
  std::vector<std::vector<double>> scripted_emissions;
  /// Optional override of the erasure draw on lossy links (tests). Return
  /// nullopt to fall back to the random draw.
  std::function<std::optional<bool>(const Packet&)> erase_override;
  std::function<void(const TraceEvent&)> trace;

  double warmup() const { return warmup_s.value_or(0.1 * duration_s); }
  void validate() const;
};

struct LinkMetrics {
  LinkId link = 0;
  std::uint64_t data_arrivals = 0;   // originals + retransmissions + recovered, both directions
  std::uint64_t coded_arrivals = 0;
  std::uint64_t ack_arrivals = 0;
  std::uint64_t erased = 0;
  double arrival_rate_pps = 0.0;     // (data + coded) per second of the metrics window
};

struct SimMetrics {
  double window_s = 0.0;
  std::vector<LinkMetrics> links;
  double aggregate_rate_pps = 0.0;  // sum of per-link data + coded rates

  std::uint64_t originals = 0;        // created in window
  std::uint64_t retransmissions = 0;  // sent in window (dup-ACK and timeout)
  std::uint64_t timeouts = 0;
  std::uint64_t recovered = 0;        // regenerated by the decoder, in window
  std::uint64_t blocks_decoded = 0;
  std::uint64_t blocks_abandoned = 0;
  std::uint64_t delivered = 0;        // in-order deliveries in window
  std::uint64_t duplicate_arrivals = 0;

  /// retransmissions / (originals + retransmissions): the probability that a
  /// transmission is later retransmitted.
  double retrans_rate = 0.0;
  double retrans_per_original = 0.0;

  double mean_delay_s = 0.0;        // creation -> in-order delivery
  double p50_delay_s = 0.0;
  double p99_delay_s = 0.0;
  double mean_arrival_delay_s = 0.0;  // creation -> first successful arrival
  double min_delay_slack_s = 0.0;     // min over deliveries of delay - path propagation
  std::uint64_t delay_samples = 0;

  // Whole-run accounting: generated = delivered + buffered + missing.
  std::uint64_t generated_total = 0;
  std::uint64_t delivered_total = 0;
  std::uint64_t buffered_total = 0;   // arrived out of order, still waiting for a gap
  std::uint64_t missing_total = 0;    // never reached the receiver
  double end_time = 0.0;
};

/// Run one simulation; a pure function of `config` (including the seed).
SimMetrics run(const SimConfig& config);

}  // namespace linc
