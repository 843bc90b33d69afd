#include "linc/simulator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <string>
#include <variant>

#include "linc/error.hpp"

namespace linc {

PoissonSource::PoissonSource(double lambda, std::uint64_t seed) : rng_(seed), gap_(lambda) {
  if (!(lambda > 0.0)) throw ParameterError("source: lambda must be positive");
}

double PoissonSource::next_gap() { return gap_(rng_); }

Channel::Schedule Channel::transmit(double now, std::uint32_t bytes) {
  const double departure = std::max(now, busy_until_) + service_time(bytes);
  busy_until_ = departure;
  return {departure, departure + latency_s_};
}

namespace {

template <typename T>
void put(Bytes& out, T v) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

template <typename T>
T get(std::span<const std::uint8_t> in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw UsageError("packet identity: truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

Bytes packet_identity(const Packet& p) {
  Bytes out;
  out.reserve(32);
  put(out, p.flow);
  put(out, p.seq);
  put(out, p.created_at);
  put(out, p.sent_at);
  put(out, p.tx);
  return out;
}

Packet packet_from_identity(std::span<const std::uint8_t> bytes) {
  Packet p;
  std::size_t pos = 0;
  p.flow = get<std::uint32_t>(bytes, pos);
  p.seq = get<std::uint64_t>(bytes, pos);
  p.created_at = get<double>(bytes, pos);
  p.sent_at = get<double>(bytes, pos);
  p.tx = get<std::uint32_t>(bytes, pos);
  return p;
}

void SimConfig::validate() const {
  coding.validate();
  if (!(duration_s > 0.0)) throw ParameterError("sim: duration must be positive");
  const double w = warmup();
  if (!(w >= 0.0 && w < duration_s)) throw ParameterError("sim: need 0 <= warmup < duration");
  if (packet_bytes == 0 || ack_bytes == 0) throw ParameterError("sim: packet sizes must be positive");
  if (flows.empty()) throw ParameterError("sim: no flows");
  if (!(rto_multiplier > 0.0)) throw ParameterError("sim: rto multiplier must be positive");
  if (dupack_threshold < 1) throw ParameterError("sim: dup-ACK threshold must be >= 1");
  if (!(reorder_window_rtt >= 0.0)) throw ParameterError("sim: reorder window must be >= 0");
  if (!scripted_emissions.empty() && scripted_emissions.size() != flows.size())
    throw ParameterError("sim: scripted emissions must list every flow");
  for (const auto& f : flows) {
    if (f.path.empty()) throw ParameterError("sim: flow without a path");
    for (const auto& h : f.path)
      if (h.link >= topology.links().size()) throw ParameterError("sim: flow path references an unknown link");
  }
}

namespace {

struct SourceEmit {
  std::uint32_t flow;
  std::size_t script_index;
};
struct ChannelArrival {
  std::size_t channel;
  Packet packet;
};
struct RetransmitTimer {
  std::uint32_t flow;
  std::uint64_t seq;
  std::uint32_t tx;
};
struct LossCheck {
  std::uint32_t flow;
  std::uint64_t seq;
  std::uint32_t tx;
};
struct BlockTimeout {
  int direction;
  std::uint32_t block_id;
  int received;
};

using Event = std::variant<SourceEmit, ChannelArrival, RetransmitTimer, LossCheck, BlockTimeout>;

struct Outstanding {
  double created_at;
  double last_sent;
  std::uint32_t tx = 0;
  int dupacks = 0;
  bool check_pending = false;
};

struct Sender {
  std::uint64_t next_seq = 0;
  std::map<std::uint64_t, Outstanding> outstanding;
  std::optional<PoissonSource> source;
  double base_rtt = 0.0;
  double propagation = 0.0;
};

struct Receiver {
  std::uint64_t next_expected = 0;
  std::map<std::uint64_t, double> buffered;  // out-of-order seq -> created_at
};

// Encoder at the head end of the lossy link, one per direction.
struct Encoder {
  std::uint32_t block_id = 0;
  std::vector<Bytes> symbols;
};

// Decoder at the far end of the lossy link, one per direction.
struct Decoder {
  struct Block {
    BlockDecoder state;
    bool done = false;
  };
  std::map<std::uint32_t, Block> blocks;
  std::uint32_t floor = 0;  // every block below this is finished
};

class Simulation {
 public:
  explicit Simulation(const SimConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const auto& topo = cfg_.topology;
    for (const auto& l : topo.links())
      for (int d = 0; d < 2; ++d) channels_.emplace_back(l.rate_bps, l.latency_s);
    for (std::size_t c = 0; c < channels_.size(); ++c)
      erasure_rng_.emplace_back(derive_seed(cfg_.seed, "erasure", c));
    link_metrics_.resize(topo.links().size());
    for (std::size_t i = 0; i < link_metrics_.size(); ++i) link_metrics_[i].link = i;

    lossy_ = topo.lossy_link();
    if (lossy_) lossy_rtt_ = 2.0 * topo.link(*lossy_).latency_s;

    senders_.resize(cfg_.flows.size());
    receivers_.resize(cfg_.flows.size());
    for (std::size_t f = 0; f < cfg_.flows.size(); ++f) {
      auto& s = senders_[f];
      s.propagation = cfg_.flows[f].propagation_s(topo);
      s.base_rtt = 2.0 * s.propagation;
      if (cfg_.scripted_emissions.empty())
        s.source.emplace(cfg_.flows[f].spec.lambda, derive_seed(cfg_.seed, "source", f));
      max_rtt_ = std::max(max_rtt_, s.base_rtt);
    }
    warmup_ = cfg_.warmup();
    horizon_ = cfg_.duration_s + cfg_.drain_s.value_or(20.0 * max_rtt_ + 1.0);
  }

  SimMetrics run() {
    for (std::uint32_t f = 0; f < senders_.size(); ++f) {
      if (cfg_.scripted_emissions.empty()) {
        queue_.push(senders_[f].source->next_gap(), SourceEmit{f, 0});
      } else if (!cfg_.scripted_emissions[f].empty()) {
        queue_.push(cfg_.scripted_emissions[f][0], SourceEmit{f, 0});
      }
    }
    while (!queue_.empty() && queue_.next_time() <= horizon_) {
      auto entry = queue_.pop();
      now_ = entry.time;
      std::visit([this](auto& ev) { handle(ev); }, entry.payload);
    }
    return finish();
  }

 private:
  bool in_window(double t) const { return t >= warmup_ && t < cfg_.duration_s; }
  bool coding_on() const { return cfg_.linc_enabled && lossy_.has_value(); }

  void trace(TraceKind kind, const Packet& p, std::uint32_t block = 0) {
    if (cfg_.trace) cfg_.trace({now_, kind, p.flow, p.seq, block, p.kind});
  }

  // --- sources and senders -------------------------------------------------

  void handle(SourceEmit& ev) {
    if (now_ >= cfg_.duration_s) return;
    auto& s = senders_[ev.flow];
    const std::uint64_t seq = s.next_seq++;
    s.outstanding.emplace(seq, Outstanding{now_, now_});
    ++generated_;
    if (in_window(now_)) ++originals_;
    transmit(ev.flow, seq, false);

    if (s.source) {
      queue_.push(now_ + s.source->next_gap(), SourceEmit{ev.flow, 0});
    } else {
      const auto& times = cfg_.scripted_emissions[ev.flow];
      if (ev.script_index + 1 < times.size()) queue_.push(times[ev.script_index + 1], SourceEmit{ev.flow, ev.script_index + 1});
    }
  }

  void transmit(std::uint32_t flow, std::uint64_t seq, bool is_retransmission) {
    auto& s = senders_[flow];
    auto& o = s.outstanding.at(seq);
    o.last_sent = now_;
    ++o.tx;
    o.dupacks = 0;
    o.check_pending = false;

    Packet p;
    p.kind = PacketKind::kData;
    p.flow = flow;
    p.seq = seq;
    p.created_at = o.created_at;
    p.sent_at = now_;
    p.tx = o.tx;
    p.size = cfg_.packet_bytes;
    p.hop = 0;
    if (!is_retransmission) trace(TraceKind::kCreated, p);
    queue_.push(now_ + cfg_.rto_multiplier * s.base_rtt, RetransmitTimer{flow, seq, o.tx});
    send_on_hop(std::move(p));
  }

  void retransmit(std::uint32_t flow, std::uint64_t seq, bool timeout) {
    if (in_window(now_)) {
      ++retransmissions_;
      if (timeout) ++timeouts_;
    }
    Packet probe;
    probe.flow = flow;
    probe.seq = seq;
    trace(timeout ? TraceKind::kTimeout : TraceKind::kRetransmit, probe);
    transmit(flow, seq, true);
  }

  void handle(RetransmitTimer& ev) {
    auto& s = senders_[ev.flow];
    const auto it = s.outstanding.find(ev.seq);
    if (it == s.outstanding.end() || it->second.tx != ev.tx) return;
    retransmit(ev.flow, ev.seq, true);
  }

  void handle(LossCheck& ev) {
    auto& s = senders_[ev.flow];
    const auto it = s.outstanding.find(ev.seq);
    if (it == s.outstanding.end() || it->second.tx != ev.tx) return;
    retransmit(ev.flow, ev.seq, false);
  }

  void on_ack(const Packet& ack) {
    trace(TraceKind::kAckReceived, ack);
    auto& s = senders_[ack.flow];
    s.outstanding.erase(s.outstanding.begin(), s.outstanding.lower_bound(ack.cum_ack));
    s.outstanding.erase(ack.trigger_seq);

    // Each copy that arrives above a hole is a duplicate ACK for that hole,
    // provided it was sent after the hole's latest transmission.
    std::vector<std::uint64_t> lost;
    for (auto it = s.outstanding.begin(); it != s.outstanding.end() && it->first < ack.trigger_seq; ++it) {
      auto& o = it->second;
      if (o.last_sent >= ack.trigger_sent_at || o.check_pending) continue;
      if (++o.dupacks >= cfg_.dupack_threshold) lost.push_back(it->first);
    }
    const double window = cfg_.reorder_window_rtt * s.base_rtt;
    for (auto seq : lost) {
      auto& o = s.outstanding.at(seq);
      if (window <= 0.0) {
        retransmit(ack.flow, seq, false);
      } else {
        o.check_pending = true;
        queue_.push(now_ + window, LossCheck{ack.flow, seq, o.tx});
      }
    }
  }

  // --- receivers --------------------------------------------------------------

  void on_data_at_receiver(const Packet& p) {
    auto& r = receivers_[p.flow];
    const auto& flow = cfg_.flows[p.flow];
    trace(TraceKind::kArrived, p);
    if (p.seq < r.next_expected || r.buffered.contains(p.seq)) {
      ++duplicates_;
    } else {
      if (in_window(p.created_at)) {
        arrival_delay_sum_ += now_ - p.created_at;
        ++arrival_delay_count_;
      }
      if (p.seq == r.next_expected) {
        deliver(p.flow, p.seq, p.created_at);
        ++r.next_expected;
        while (!r.buffered.empty() && r.buffered.begin()->first == r.next_expected) {
          deliver(p.flow, r.next_expected, r.buffered.begin()->second);
          r.buffered.erase(r.buffered.begin());
          ++r.next_expected;
        }
      } else {
        r.buffered.emplace(p.seq, p.created_at);
      }
    }

    Packet ack;
    ack.kind = PacketKind::kAck;
    ack.flow = p.flow;
    ack.seq = p.seq;
    ack.size = cfg_.ack_bytes;
    ack.sent_at = now_;
    ack.cum_ack = r.next_expected;
    ack.trigger_seq = p.seq;
    ack.trigger_sent_at = p.sent_at;
    ack.hop = 0;
    (void)flow;
    send_on_hop(std::move(ack));
  }

  void deliver(std::uint32_t flow, std::uint64_t seq, double created_at) {
    ++delivered_total_;
    if (in_window(now_)) ++delivered_;
    Packet p;
    p.flow = flow;
    p.seq = seq;
    trace(TraceKind::kDelivered, p);
    if (in_window(created_at)) {
      const double d = now_ - created_at;
      delays_.push_back(d);
      min_slack_ = std::min(min_slack_, d - senders_[flow].propagation);
    }
  }

  // --- network ----------------------------------------------------------------

  // Hop `p.hop` of the packet's route: the flow path for data, reversed for ACKs.
  Hop hop_of(const Packet& p) const {
    const auto& path = cfg_.flows[p.flow].path;
    if (p.kind == PacketKind::kAck) {
      const Hop h = path[path.size() - 1 - p.hop];
      return {h.link, 1 - h.direction};
    }
    return path[p.hop];
  }

  void send_on_hop(Packet p) {
    const Hop h = hop_of(p);
    if (p.kind == PacketKind::kData && coding_on() && h.link == *lossy_) {
      encode_ingress(h.direction, std::move(p));
      return;
    }
    enqueue(h.link * 2 + h.direction, std::move(p));
  }

  void enqueue(std::size_t channel, Packet p) {
    const LinkId link = channel / 2;
    if (in_window(now_)) {
      auto& m = link_metrics_[link];
      switch (p.kind) {
        case PacketKind::kData: ++m.data_arrivals; break;
        case PacketKind::kCoded: ++m.coded_arrivals; break;
        case PacketKind::kAck: ++m.ack_arrivals; break;
      }
    }
    const auto sched = channels_[channel].transmit(now_, p.size);
    queue_.push(sched.arrival, ChannelArrival{channel, std::move(p)});
  }

  bool erased(std::size_t channel, const Packet& p) {
    const auto& link = cfg_.topology.link(channel / 2);
    if (link.loss_prob <= 0.0) return false;
    if (p.kind == PacketKind::kAck && !cfg_.ack_lossy) return false;
    // Always draw so scripted overrides do not shift the random stream.
    const bool draw = std::uniform_real_distribution<double>(0.0, 1.0)(erasure_rng_[channel]) < link.loss_prob;
    if (cfg_.erase_override)
      if (auto forced = cfg_.erase_override(p)) return *forced;
    return draw;
  }

  void handle(ChannelArrival& ev) {
    Packet& p = ev.packet;
    const LinkId link = ev.channel / 2;
    const int direction = static_cast<int>(ev.channel % 2);
    if (erased(ev.channel, p)) {
      if (in_window(now_)) ++link_metrics_[link].erased;
      trace(TraceKind::kErased, p, p.tag ? p.tag->block_id : 0);
      return;
    }
    if (p.kind == PacketKind::kCoded || (p.kind == PacketKind::kData && p.tag && lossy_ && link == *lossy_)) {
      decode_egress(direction, std::move(p));
      return;
    }
    forward(std::move(p));
  }

  // Packet finished hop `p.hop`; move it on or hand it to its endpoint.
  void forward(Packet p) {
    const auto& path = cfg_.flows[p.flow].path;
    ++p.hop;
    if (p.hop == path.size()) {
      if (p.kind == PacketKind::kAck) on_ack(p);
      else on_data_at_receiver(p);
      return;
    }
    send_on_hop(std::move(p));
  }

  // --- in-network coding ------------------------------------------------------

  void encode_ingress(int direction, Packet p) {
    auto& enc = encoders_[direction];
    const auto& params = cfg_.coding;
    const std::size_t channel = *lossy_ * 2 + direction;
    p.tag = CodedPacketTag{enc.block_id, static_cast<std::uint16_t>(enc.symbols.size()), 0};
    Bytes identity = packet_identity(p);
    p.tag->payload_len = static_cast<std::uint16_t>(identity.size());
    enc.symbols.push_back(std::move(identity));
    enqueue(channel, std::move(p));
    if (static_cast<int>(enc.symbols.size()) < params.k) return;

    if (params.coding_enabled()) {
      auto coded = encode_block(params, enc.block_id, enc.symbols);
      for (int i = params.k; i < params.n; ++i) {
        Packet c;
        c.kind = PacketKind::kCoded;
        c.size = cfg_.packet_bytes;
        c.sent_at = now_;
        c.tag = coded[i].tag;
        c.coded_payload = std::move(coded[i].payload);
        enqueue(channel, std::move(c));
      }
    }
    ++enc.block_id;
    enc.symbols.clear();
  }

  void decode_egress(int direction, Packet p) {
    auto& dec = decoders_[direction];
    const auto& params = cfg_.coding;
    const CodedPacketTag tag = *p.tag;

    // The lossy link is FIFO: a packet from a later block means earlier blocks are complete.
    if (tag.block_id > dec.floor) {
      for (auto it = dec.blocks.begin(); it != dec.blocks.end() && it->first < tag.block_id;) {
        if (!it->second.done) abandon(direction, it->first);
        it = dec.blocks.erase(it);
      }
      dec.floor = tag.block_id;
    }
    if (tag.block_id < dec.floor) {
      if (p.kind == PacketKind::kData) forward(std::move(p));
      return;
    }

    auto [it, inserted] = dec.blocks.try_emplace(tag.block_id, Decoder::Block{BlockDecoder(params)});
    auto& block = it->second;
    if (block.done) {
      if (p.kind == PacketKind::kData) forward(std::move(p));
      return;
    }

    CodedPacket cp{tag, p.kind == PacketKind::kCoded ? p.coded_payload : packet_identity(p)};
    auto recovered = block.state.add(cp);
    if (p.kind == PacketKind::kData) forward(std::move(p));

    if (block.state.decoded()) {
      block.done = true;
      if (in_window(now_)) ++blocks_decoded_;
      Packet marker;
      trace(TraceKind::kBlockDecoded, marker, tag.block_id);
      for (auto& r : recovered) {
        Packet q = packet_from_identity(r.payload);
        q.kind = PacketKind::kData;
        q.size = cfg_.packet_bytes;
        // Parity packets carry no flow, so take the hop from the recovered packet's own path.
        q.hop = static_cast<std::uint32_t>(*cfg_.flows.at(q.flow).lossy_hop);
        if (in_window(now_)) ++recovered_;
        trace(TraceKind::kRecovered, q, tag.block_id);
        forward(std::move(q));
      }
      return;
    }

    // Indices below this one that are missing will never arrive.
    if (block.state.received() + (params.n - 1 - tag.index) < params.k) {
      abandon(direction, tag.block_id);
      block.done = true;
      return;
    }
    // Parity leaves back to back after the last systematic packet; allow for the rest of the block to drain.
    if (tag.index >= params.k - 1) {
      const double drain = 2.0 * (params.n - tag.index) * channels_[*lossy_ * 2 + direction].service_time(cfg_.packet_bytes);
      queue_.push(now_ + 2.0 * lossy_rtt_ + drain, BlockTimeout{direction, tag.block_id, block.state.received()});
    }
  }

  void handle(BlockTimeout& ev) {
    auto& dec = decoders_[ev.direction];
    const auto it = dec.blocks.find(ev.block_id);
    if (it == dec.blocks.end() || it->second.done || it->second.state.received() != ev.received) return;
    it->second.done = true;
    abandon(ev.direction, ev.block_id);
  }

  void abandon(int, std::uint32_t block_id) {
    if (in_window(now_)) ++blocks_abandoned_;
    Packet marker;
    trace(TraceKind::kBlockAbandoned, marker, block_id);
  }

  // --- results ----------------------------------------------------------------

  SimMetrics finish() {
    SimMetrics m;
    m.window_s = cfg_.duration_s - warmup_;
    m.links = link_metrics_;
    for (auto& l : m.links) {
      l.arrival_rate_pps = static_cast<double>(l.data_arrivals + l.coded_arrivals) / m.window_s;
      m.aggregate_rate_pps += l.arrival_rate_pps;
    }
    m.originals = originals_;
    m.retransmissions = retransmissions_;
    m.timeouts = timeouts_;
    m.recovered = recovered_;
    m.blocks_decoded = blocks_decoded_;
    m.blocks_abandoned = blocks_abandoned_;
    m.delivered = delivered_;
    m.duplicate_arrivals = duplicates_;
    const double transmissions = static_cast<double>(originals_ + retransmissions_);
    m.retrans_rate = transmissions > 0 ? retransmissions_ / transmissions : 0.0;
    m.retrans_per_original = originals_ > 0 ? static_cast<double>(retransmissions_) / originals_ : 0.0;

    m.delay_samples = delays_.size();
    if (!delays_.empty()) {
      double sum = 0.0;
      for (double d : delays_) sum += d;
      m.mean_delay_s = sum / delays_.size();
      auto pct = [this](double q) {
        std::vector<double> v = delays_;
        const auto idx = static_cast<std::size_t>(q * (v.size() - 1));
        std::nth_element(v.begin(), v.begin() + idx, v.end());
        return v[idx];
      };
      m.p50_delay_s = pct(0.50);
      m.p99_delay_s = pct(0.99);
      m.min_delay_slack_s = min_slack_;
    }
    if (arrival_delay_count_ > 0) m.mean_arrival_delay_s = arrival_delay_sum_ / arrival_delay_count_;

    m.generated_total = generated_;
    m.delivered_total = delivered_total_;
    for (std::size_t f = 0; f < receivers_.size(); ++f) m.buffered_total += receivers_[f].buffered.size();
    m.missing_total = generated_ - delivered_total_ - m.buffered_total;
    m.end_time = now_;
    return m;
  }

  SimConfig cfg_;
  EventQueue<Event> queue_;
  std::vector<Channel> channels_;
  std::vector<Rng> erasure_rng_;
  std::vector<LinkMetrics> link_metrics_;
  std::vector<Sender> senders_;
  std::vector<Receiver> receivers_;
  Encoder encoders_[2];
  Decoder decoders_[2];
  std::optional<LinkId> lossy_;
  double lossy_rtt_ = 0.0;
  double max_rtt_ = 0.0;
  double warmup_ = 0.0;
  double horizon_ = 0.0;
  double now_ = 0.0;

  std::uint64_t generated_ = 0;
  std::uint64_t originals_ = 0;
  std::uint64_t retransmissions_ = 0;
  std::uint64_t timeouts_ = 0;
  std::uint64_t recovered_ = 0;
  std::uint64_t blocks_decoded_ = 0;
  std::uint64_t blocks_abandoned_ = 0;
  std::uint64_t delivered_ = 0;
  std::uint64_t delivered_total_ = 0;
  std::uint64_t duplicates_ = 0;
  std::vector<double> delays_;
  double min_slack_ = std::numeric_limits<double>::infinity();
  double arrival_delay_sum_ = 0.0;
  std::uint64_t arrival_delay_count_ = 0;
};

}  // namespace

SimMetrics run(const SimConfig& config) { return Simulation(config).run(); }

}  // namespace linc
