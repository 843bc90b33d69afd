#include "linc/simulator.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "linc/error.hpp"
#include "linc/experiment.hpp"

namespace linc {
namespace {

// s -- a ~~ b -- d, lossy middle link.
Topology chain(double eps, double rate_bps = 1e9) {
  Topology t;
  for (auto s : {"s", "a", "b", "d"}) t.add_node(s);
  t.add_link(0, 1, 10e-3, rate_bps);
  t.add_link(1, 2, 1e-3, rate_bps);
  t.add_link(2, 3, 10e-3, rate_bps);
  return mark_lossy(t, "a", "b", eps);
}

SimConfig micro(double eps, CodingParams coding, std::vector<double> emissions) {
  SimConfig cfg;
  cfg.topology = chain(eps);
  cfg.flows = route(cfg.topology, {{0, 3, 1.0}});
  cfg.coding = coding;
  cfg.scripted_emissions = {std::move(emissions)};
  cfg.duration_s = 1.0;
  cfg.warmup_s = 0.0;
  return cfg;
}

std::vector<double> evenly(int count, double gap = 1e-3) {
  std::vector<double> t;
  for (int i = 0; i < count; ++i) t.push_back(i * gap);
  return t;
}

// Erase the first transmission of the listed data seqs, or listed parity indices.
std::function<std::optional<bool>(const Packet&)> erase_first(std::vector<std::uint64_t> seqs,
                                                              std::vector<int> parity = {}) {
  return [seqs, parity](const Packet& p) -> std::optional<bool> {
    if (p.kind == PacketKind::kData)
      return p.tx == 1 && std::find(seqs.begin(), seqs.end(), p.seq) != seqs.end();
    if (p.kind == PacketKind::kCoded)
      return std::find(parity.begin(), parity.end(), p.tag->index) != parity.end();
    return false;
  };
}

struct Recorder {
  std::vector<TraceEvent> events;
  std::function<void(const TraceEvent&)> hook() {
    return [this](const TraceEvent& e) { events.push_back(e); };
  }
  std::vector<TraceEvent> of(TraceKind k) const {
    std::vector<TraceEvent> out;
    for (const auto& e : events)
      if (e.kind == k) out.push_back(e);
    return out;
  }
};

TEST(EventQueue, TimeThenInsertionOrder) {
  EventQueue<int> q;
  q.push(2.0, 1);
  q.push(1.0, 2);
  q.push(2.0, 3);
  q.push(1.0, 4);
  std::vector<int> got;
  while (!q.empty()) got.push_back(q.pop().payload);
  EXPECT_EQ(got, (std::vector<int>{2, 4, 1, 3}));
}

TEST(Channel, ServiceTime) {
  Channel c(100e9, 1e-3);
  EXPECT_NEAR(c.service_time(1500), 0.12e-6, 1e-18);
  const auto a = c.transmit(0.0, 1500);
  const auto b = c.transmit(0.0, 1500);
  EXPECT_NEAR(a.departure, 0.12e-6, 1e-18);
  EXPECT_NEAR(b.departure, 0.24e-6, 1e-18);
  EXPECT_NEAR(b.arrival, 1e-3 + 0.24e-6, 1e-15);
}

TEST(PoissonSource, CountWithinThreeSigma) {
  PoissonSource src(100.0, 42);
  double t = 0.0;
  int count = 0;
  while ((t += src.next_gap()) < 100.0) ++count;
  EXPECT_NEAR(count, 10000, 3 * 100);
}

TEST(PoissonSource, SeedsGiveDifferentRealizations) {
  PoissonSource a(100.0, derive_seed(1, "source", 0)), b(100.0, derive_seed(1, "source", 1));
  PoissonSource c(100.0, derive_seed(1, "source", 0));
  bool differ = false;
  for (int i = 0; i < 10; ++i) {
    const double x = a.next_gap();
    differ |= x != b.next_gap();
    EXPECT_EQ(x, c.next_gap());
  }
  EXPECT_TRUE(differ);
}

TEST(PacketIdentity, RoundTrip) {
  Packet p;
  p.flow = 3;
  p.seq = 123456789012ull;
  p.created_at = 1.25;
  p.sent_at = 2.5;
  p.tx = 2;
  const auto q = packet_from_identity(packet_identity(p));
  EXPECT_EQ(q.flow, p.flow);
  EXPECT_EQ(q.seq, p.seq);
  EXPECT_EQ(q.created_at, p.created_at);
  EXPECT_EQ(q.sent_at, p.sent_at);
  EXPECT_EQ(q.tx, p.tx);
}

TEST(Sim, LosslessUncodedIsPureLatency) {
  auto cfg = micro(0.0, {1, 1}, evenly(20, 5e-3));
  Recorder rec;
  cfg.trace = rec.hook();
  const auto m = run(cfg);
  EXPECT_EQ(m.retransmissions, 0u);
  EXPECT_EQ(m.recovered, 0u);
  EXPECT_EQ(m.delivered, 20u);
  const double service = 1500 * 8 / 1e9;
  EXPECT_NEAR(m.mean_delay_s, 21e-3 + 3 * service, 1e-12);
  // In-order delivery, one per seq.
  const auto d = rec.of(TraceKind::kDelivered);
  ASSERT_EQ(d.size(), 20u);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(d[i].seq, i);
}

TEST(Sim, SingleLossOneFastRetransmit) {
  auto cfg = micro(0.5, {1, 1}, evenly(10));
  cfg.linc_enabled = false;
  cfg.erase_override = erase_first({2});
  Recorder rec;
  cfg.trace = rec.hook();
  const auto m = run(cfg);
  EXPECT_EQ(m.retransmissions, 1u);
  EXPECT_EQ(m.timeouts, 0u);
  EXPECT_EQ(m.delivered, 10u);

  const auto rt = rec.of(TraceKind::kRetransmit);
  ASSERT_EQ(rt.size(), 1u);
  EXPECT_EQ(rt[0].seq, 2u);
  // Third duplicate comes from seq 5; then the reorder window.
  double third_dup = -1;
  for (const auto& e : rec.of(TraceKind::kAckReceived))
    if (e.seq == 5) third_dup = e.time;
  const double rtt = 2 * 21e-3;
  EXPECT_NEAR(rt[0].time, third_dup + 0.25 * rtt, 1e-12);
}

TEST(Sim, NoReorderWindowRetransmitsOnThirdDup) {
  auto cfg = micro(0.5, {1, 1}, evenly(10));
  cfg.linc_enabled = false;
  cfg.reorder_window_rtt = 0.0;
  cfg.erase_override = erase_first({2});
  Recorder rec;
  cfg.trace = rec.hook();
  run(cfg);
  double third_dup = -1;
  for (const auto& e : rec.of(TraceKind::kAckReceived))
    if (e.seq == 5) third_dup = e.time;
  const auto rt = rec.of(TraceKind::kRetransmit);
  ASSERT_EQ(rt.size(), 1u);
  EXPECT_EQ(rt[0].time, third_dup);
}

TEST(Sim, TailLossRecoveredByTimeout) {
  auto cfg = micro(0.5, {1, 1}, evenly(10));
  cfg.linc_enabled = false;
  cfg.erase_override = erase_first({9});
  Recorder rec;
  cfg.trace = rec.hook();
  const auto m = run(cfg);
  EXPECT_EQ(m.timeouts, 1u);
  EXPECT_EQ(m.retransmissions, 1u);
  EXPECT_TRUE(rec.of(TraceKind::kRetransmit).empty());
  const auto to = rec.of(TraceKind::kTimeout);
  ASSERT_EQ(to.size(), 1u);
  EXPECT_NEAR(to[0].time, 9e-3 + 3 * 2 * 21e-3, 1e-12);
  EXPECT_EQ(m.delivered, 10u);
}

TEST(Sim, RecoveryAtKthArrival) {
  // k=2, n=3: lose systematic 0, parity arrives as the 2nd packet of the block.
  auto cfg = micro(0.5, {2, 3}, {0.0, 1e-3});
  cfg.erase_override = erase_first({0});
  Recorder rec;
  cfg.trace = rec.hook();
  const auto m = run(cfg);
  EXPECT_EQ(m.retransmissions, 0u);
  EXPECT_EQ(m.recovered, 1u);
  EXPECT_EQ(m.blocks_decoded, 1u);
  const auto r = rec.of(TraceKind::kRecovered);
  const auto dec = rec.of(TraceKind::kBlockDecoded);
  ASSERT_EQ(r.size(), 1u);
  ASSERT_EQ(dec.size(), 1u);
  EXPECT_EQ(r[0].seq, 0u);
  EXPECT_EQ(r[0].time, dec[0].time);
  // Parity leaves right behind seq 1 at a, so it lands one service time later.
  const double service = 1500 * 8 / 1e9;
  const double seq1_at_b = 1e-3 + 10e-3 + service + 1e-3 + service;
  EXPECT_NEAR(r[0].time, seq1_at_b + service, 1e-12);
  EXPECT_EQ(m.delivered, 2u);
}

TEST(Sim, AllSystematicNoAddedDelay) {
  auto cfg = micro(0.5, {2, 4}, evenly(8));
  cfg.erase_override = erase_first({});
  const auto m = run(cfg);
  EXPECT_EQ(m.recovered, 0u);
  const double service = 1500 * 8 / 1e9;
  EXPECT_NEAR(m.mean_arrival_delay_s, 21e-3 + 3 * service, 1e-12);
  EXPECT_NEAR(m.mean_delay_s, 21e-3 + 3 * service, 1e-12);
}

TEST(Sim, BlockShortOfKIsAbandoned) {
  // k=3, n=4: lose two systematic packets, only k-1 arrive.
  auto cfg = micro(0.5, {3, 4}, evenly(3));
  cfg.erase_override = erase_first({0, 1});
  Recorder rec;
  cfg.trace = rec.hook();
  const auto m = run(cfg);
  EXPECT_EQ(m.recovered, 0u);
  EXPECT_EQ(rec.of(TraceKind::kBlockAbandoned).size(), 1u);
  EXPECT_EQ(m.retransmissions, 2u);
  EXPECT_EQ(m.delivered, 3u);
}

TEST(Sim, RepetitionCodeOneParityPerPacket) {
  auto cfg = micro(0.0, {1, 2}, evenly(25));
  const auto m = run(cfg);
  const auto& lossy = m.links[1];
  EXPECT_EQ(lossy.data_arrivals, 25u);
  EXPECT_EQ(lossy.coded_arrivals, 25u);
  EXPECT_EQ(m.links[0].coded_arrivals, 0u);
  EXPECT_EQ(m.links[2].coded_arrivals, 0u);
}

TEST(Sim, NoParityWhenNEqualsK) {
  auto cfg = micro(0.0, {5, 5}, evenly(25));
  EXPECT_EQ(run(cfg).links[1].coded_arrivals, 0u);
}

TEST(Sim, ParityOnlyAfterFullBlocks) {
  auto cfg = micro(0.0, {50, 53}, evenly(149, 1e-4));
  Recorder rec;
  cfg.trace = rec.hook();
  const auto m = run(cfg);
  EXPECT_EQ(m.links[1].coded_arrivals, 6u);  // two full blocks; the third is short
  EXPECT_EQ(rec.of(TraceKind::kBlockDecoded).size(), 2u);
}

TEST(Sim, EpsilonOneDeliversNothing) {
  auto cfg = micro(1.0, {1, 1}, evenly(5));
  cfg.drain_s = 1.0;
  const auto m = run(cfg);
  EXPECT_EQ(m.delivered, 0u);
  EXPECT_EQ(m.links[2].data_arrivals, 0u);
  EXPECT_GT(m.timeouts, 0u);
}

SimConfig scenario1_config(double eps, int n, std::uint64_t seed, double duration = 6.0) {
  auto spec = default_spec("scenario1");
  spec.duration_s = duration;
  const auto sc = prepare(spec, eps);
  return make_sim_config(spec, sc, eps, n, seed);
}

std::string csv_of(const SimConfig& cfg) {
  return sim_table("t", {SimRun{0.05, cfg.coding.k, cfg.coding.n, cfg.seed, run(cfg)}}).to_string();
}

TEST(Sim, Deterministic) {
  const auto cfg = scenario1_config(0.05, 55, 7);
  EXPECT_EQ(csv_of(cfg), csv_of(cfg));
  auto other = cfg;
  other.seed = 8;
  EXPECT_NE(csv_of(cfg), csv_of(other));
}

TEST(Sim, NEqualsKMatchesNoCoding) {
  auto a = scenario1_config(0.05, 50, 3);
  auto b = a;
  b.linc_enabled = false;
  const auto ma = run(a), mb = run(b);
  EXPECT_EQ(ma.retransmissions, mb.retransmissions);
  EXPECT_EQ(ma.delivered, mb.delivered);
  EXPECT_EQ(ma.mean_delay_s, mb.mean_delay_s);
  EXPECT_EQ(ma.aggregate_rate_pps, mb.aggregate_rate_pps);
}

TEST(Sim, ZeroEpsilonMarkedEqualsUnmarked) {
  auto a = scenario1_config(0.0, 50, 3);
  auto b = a;
  b.topology.mutable_link(*b.topology.lossy_link()).loss_prob = 0.0;
  b.topology.mutable_link(*b.topology.lossy_link()).is_lossy = false;
  b.linc_enabled = false;
  const auto ma = run(a), mb = run(b);
  EXPECT_EQ(ma.retransmissions, 0u);
  EXPECT_EQ(ma.delivered, mb.delivered);
  EXPECT_EQ(ma.mean_delay_s, mb.mean_delay_s);
}

TEST(Sim, ConservationAndDelayBound) {
  for (int n : {50, 52, 60}) {
    const auto m = run(scenario1_config(0.1, n, 11));
    EXPECT_EQ(m.generated_total, m.delivered_total + m.buffered_total + m.missing_total);
    EXPECT_EQ(m.missing_total, 0u);
    EXPECT_EQ(m.buffered_total, 0u);
    EXPECT_GE(m.min_delay_slack_s, 0.0);
    EXPECT_GE(m.mean_delay_s, 0.401);
  }
}

TEST(Sim, ErasureRateWithinThreeSigma) {
  // Single lossy link, about a million packets.
  Topology t;
  t.add_node("a");
  t.add_node("b");
  t.add_link(0, 1, 1e-4, 1e10);
  t = mark_lossy(t, "a", "b", 0.05);
  SimConfig cfg;
  cfg.topology = t;
  cfg.flows = normalize_load(t, route(t, {{0, 1, 1.0}}), 0.2);
  cfg.duration_s = 1e6 / cfg.flows[0].spec.lambda / 0.9;
  cfg.linc_enabled = false;
  const auto m = run(cfg);
  const auto& l = m.links[0];
  const double n = static_cast<double>(l.data_arrivals);
  ASSERT_GT(n, 9e5);
  const double sigma = std::sqrt(n * 0.05 * 0.95);
  EXPECT_NEAR(static_cast<double>(l.erased), 0.05 * n, 3 * sigma);
}

TEST(Sim, CodingRemovesRetransmissions) {
  const auto m = run(scenario1_config(0.05, 65, 5));
  EXPECT_EQ(m.retransmissions, 0u);
  EXPECT_GT(m.recovered, 0u);
}

TEST(SimConfig, Validation) {
  auto cfg = micro(0.1, {2, 3}, evenly(3));
  cfg.duration_s = 0.0;
  EXPECT_THROW(run(cfg), ParameterError);
  cfg = micro(0.1, {3, 2}, evenly(3));
  EXPECT_THROW(run(cfg), ParameterError);
  cfg = micro(0.1, {2, 3}, evenly(3));
  cfg.flows.clear();
  EXPECT_THROW(run(cfg), ParameterError);
}

}  // namespace
}  // namespace linc
