#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "linc/analytic_model.hpp"

namespace linc {

using NodeId = std::size_t;
using LinkId = std::size_t;

inline constexpr double kDefaultLinkRateBps = 100e9;
inline constexpr double kFiberSpeedKmPerS = 2e5;
inline constexpr double kEarthRadiusKm = 6371.0;
inline constexpr double kMinLatencyS = 1e-5;  // floor for coincident nodes
inline constexpr std::uint32_t kDefaultPacketBytes = 1500;

struct Node {
  NodeId id = 0;
  std::string label;
  std::optional<double> latitude;
  std::optional<double> longitude;
};

/// Undirected, full-duplex link. Direction 0 carries a -> b, direction 1 b -> a.
struct Link {
  LinkId id = 0;
  NodeId a = 0;
  NodeId b = 0;
  double rate_bps = kDefaultLinkRateBps;
  double latency_s = 0.0;
  double loss_prob = 0.0;
  bool is_lossy = false;

  NodeId other(NodeId from) const { return from == a ? b : a; }
};

class Topology {
 public:
  NodeId add_node(std::string label, std::optional<double> lat = {}, std::optional<double> lon = {});
  LinkId add_link(NodeId a, NodeId b, double latency_s, double rate_bps = kDefaultLinkRateBps);

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Link>& links() const { return links_; }
  const Node& node(NodeId id) const { return nodes_.at(id); }
  const Link& link(LinkId id) const { return links_.at(id); }
  Link& mutable_link(LinkId id) { return links_.at(id); }
  const std::vector<LinkId>& incident(NodeId id) const { return adjacency_.at(id); }

  /// Throws ConfigError if no node has this label.
  NodeId find_node(const std::string& label) const;
  /// First link joining the two nodes (either orientation), if any.
  std::optional<LinkId> find_link(NodeId a, NodeId b) const;
  std::optional<LinkId> lossy_link() const;

  /// Multiply every link rate by `factor` (desk-scale time compression).
  void scale_rates(double factor);

 private:
  std::vector<Node> nodes_;
  std::vector<Link> links_;
  std::vector<std::vector<LinkId>> adjacency_;
};

struct FlowSpec {
  NodeId source = 0;
  NodeId destination = 0;
  double lambda = 1.0;  // packets/second
};

struct Hop {
  LinkId link;
  int direction;  // 0: a -> b, 1: b -> a
};

struct RoutedFlow {
  FlowSpec spec;
  std::vector<Hop> path;
  std::vector<NodeId> nodes;  // path.size() + 1 nodes, source first
  int eta = 0;                // non-lossy links on the path
  bool crosses_lossy = false;
  std::optional<std::size_t> lossy_hop;  // index into path

  double propagation_s(const Topology& topo) const;
};

/// Great-circle distance in km on a 6371 km sphere.
double haversine_km(double lat1, double lon1, double lat2, double lon2);

/// 6-node chain, 5 links, 100 Gbit/s. The middle link is lossy (1 ms, 5%),
/// the others have 100 ms latency. Two flows cross the whole chain; their
/// rates are drawn uniformly from [0.5, 1.5] using `seed` (normalize later).
struct Scenario {
  Topology topology;
  std::vector<FlowSpec> flows;
};
Scenario builtin_scenario1(std::uint64_t seed = 1);

/// Import a Topology Zoo GraphML file. Latency comes from the haversine
/// distance at 2e5 km/s (floored at 0.01 ms), rates are 100 Gbit/s and no
/// link is lossy.
Topology load_graphml(const std::string& path);
Topology parse_graphml(const std::string& xml_text);

/// Copy of `topo` where only the (a, b) link is lossy with probability epsilon.
Topology mark_lossy(const Topology& topo, const std::string& label_a, const std::string& label_b, double epsilon);

enum class RoutingMode {
  kShortest,      // latency-shortest path; flows must happen to cross the lossy link
  kThroughLossy,  // shortest simple path among those that traverse the lossy link
};

/// Deterministic Dijkstra on link latency (ties go to the lower node id).
/// Throws RoutingError for unreachable pairs and for paths that miss the
/// lossy link when one is marked.
std::vector<RoutedFlow> route(const Topology& topo, const std::vector<FlowSpec>& flows,
                              RoutingMode mode = RoutingMode::kShortest);

/// Mean utilization (bits/s over rate) across links with nonzero traffic.
double mean_utilization(const Topology& topo, const std::vector<RoutedFlow>& routed,
                        std::uint32_t packet_bytes = kDefaultPacketBytes);

/// Scale every lambda by one common factor so mean_utilization == target.
std::vector<RoutedFlow> normalize_load(const Topology& topo, std::vector<RoutedFlow> routed, double target,
                                       std::uint32_t packet_bytes = kDefaultPacketBytes);

/// Analytic-model view of a routed experiment.
FlowEnsemble to_ensemble(const std::vector<RoutedFlow>& routed);

}  // namespace linc
