#include "linc/topology.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <queue>
#include <random>
#include <set>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "linc/error.hpp"
#include "linc/rng.hpp"

namespace linc {

NodeId Topology::add_node(std::string label, std::optional<double> lat, std::optional<double> lon) {
  const NodeId id = nodes_.size();
  nodes_.push_back({id, std::move(label), lat, lon});
  adjacency_.emplace_back();
  return id;
}

LinkId Topology::add_link(NodeId a, NodeId b, double latency_s, double rate_bps) {
  if (a >= nodes_.size() || b >= nodes_.size()) throw ParameterError("topology: link endpoint does not exist");
  if (a == b) throw ParameterError("topology: self-loop on node '" + nodes_[a].label + "'");
  if (!(latency_s > 0.0)) throw ParameterError("topology: link latency must be positive");
  if (!(rate_bps > 0.0)) throw ParameterError("topology: link rate must be positive");
  const LinkId id = links_.size();
  links_.push_back({id, a, b, rate_bps, latency_s, 0.0, false});
  adjacency_[a].push_back(id);
  adjacency_[b].push_back(id);
  return id;
}

NodeId Topology::find_node(const std::string& label) const {
  for (const auto& n : nodes_)
    if (n.label == label) return n.id;
  throw ConfigError("topology: no node labelled '" + label + "'");
}

std::optional<LinkId> Topology::find_link(NodeId a, NodeId b) const {
  if (a >= nodes_.size()) return std::nullopt;
  for (LinkId l : adjacency_[a])
    if (links_[l].other(a) == b) return l;
  return std::nullopt;
}

std::optional<LinkId> Topology::lossy_link() const {
  for (const auto& l : links_)
    if (l.is_lossy) return l.id;
  return std::nullopt;
}

void Topology::scale_rates(double factor) {
  if (!(factor > 0.0)) throw ParameterError("topology: rate scale must be positive");
  for (auto& l : links_) l.rate_bps *= factor;
}

double RoutedFlow::propagation_s(const Topology& topo) const {
  double s = 0.0;
  for (const auto& h : path) s += topo.link(h.link).latency_s;
  return s;
}

double haversine_km(double lat1, double lon1, double lat2, double lon2) {
  constexpr double rad = std::numbers::pi / 180.0;
  const double p1 = lat1 * rad;
  const double p2 = lat2 * rad;
  const double dp = (lat2 - lat1) * rad;
  const double dl = (lon2 - lon1) * rad;
  const double h = std::sin(dp / 2) * std::sin(dp / 2) + std::cos(p1) * std::cos(p2) * std::sin(dl / 2) * std::sin(dl / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

Scenario builtin_scenario1(std::uint64_t seed) {
  Scenario sc;
  auto& t = sc.topology;
  for (int i = 1; i <= 6; ++i) t.add_node("s" + std::to_string(i));
  for (NodeId i = 0; i < 5; ++i) t.add_link(i, i + 1, i == 2 ? 1e-3 : 100e-3);
  t.mutable_link(2).loss_prob = 0.05;
  t.mutable_link(2).is_lossy = true;

  // Hosts sit on the end switches, so both flows span the chain.
  std::mt19937_64 rng(derive_seed(seed, "scenario-rates", 0));
  std::uniform_real_distribution<double> u(0.5, 1.5);
  sc.flows.push_back({0, 5, u(rng)});
  sc.flows.push_back({0, 5, u(rng)});
  return sc;
}

Topology parse_graphml(const std::string& xml_text) {
  namespace pt = boost::property_tree;
  pt::ptree doc;
  try {
    std::istringstream in(xml_text);
    pt::read_xml(in, doc);
  } catch (const pt::xml_parser_error& e) {
    throw IngestionError(std::string("graphml: parse error: ") + e.what());
  }
  const auto root = doc.get_child_optional("graphml");
  if (!root) throw IngestionError("graphml: missing <graphml> root element");

  std::map<std::string, std::string> key_names;  // key id -> attr.name
  for (const auto& [tag, child] : *root) {
    if (tag != "key") continue;
    key_names[child.get<std::string>("<xmlattr>.id", "")] = child.get<std::string>(pt::ptree::path_type("<xmlattr>/attr.name", '/'), "");
  }
  const auto graph = root->get_child_optional("graph");
  if (!graph) throw IngestionError("graphml: missing <graph> element");

  Topology topo;
  std::map<std::string, NodeId> ids;
  for (const auto& [tag, child] : *graph) {
    if (tag != "node") continue;
    const auto xml_id = child.get<std::string>("<xmlattr>.id", "");
    if (xml_id.empty()) throw IngestionError("graphml: node without id");
    std::string label = xml_id;
    std::optional<double> lat, lon;
    for (const auto& [dtag, data] : child) {
      if (dtag != "data") continue;
      const auto& name = key_names[data.get<std::string>("<xmlattr>.key", "")];
      const auto value = data.get_value<std::string>();
      try {
        if (name == "Latitude") lat = std::stod(value);
        else if (name == "Longitude") lon = std::stod(value);
        else if (name == "label") label = value;
      } catch (const std::exception&) {
        throw IngestionError("graphml: bad " + name + " value '" + value + "' on node " + xml_id);
      }
    }
    if (!ids.emplace(xml_id, topo.add_node(label, lat, lon)).second)
      throw IngestionError("graphml: duplicate node id " + xml_id);
  }

  for (const auto& [tag, child] : *graph) {
    if (tag != "edge") continue;
    const auto src = child.get<std::string>("<xmlattr>.source", "");
    const auto dst = child.get<std::string>("<xmlattr>.target", "");
    const auto a = ids.find(src);
    const auto b = ids.find(dst);
    if (a == ids.end() || b == ids.end()) throw IngestionError("graphml: edge references unknown node " + src + "/" + dst);
    for (NodeId end : {a->second, b->second}) {
      const auto& n = topo.node(end);
      if (!n.latitude || !n.longitude)
        throw IngestionError("graphml: node '" + n.label + "' has an edge but no Latitude/Longitude");
    }
    const auto& na = topo.node(a->second);
    const auto& nb = topo.node(b->second);
    const double km = haversine_km(*na.latitude, *na.longitude, *nb.latitude, *nb.longitude);
    topo.add_link(a->second, b->second, std::max(kMinLatencyS, km / kFiberSpeedKmPerS));
  }
  return topo;
}

Topology load_graphml(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("graphml: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_graphml(buf.str());
}

Topology mark_lossy(const Topology& topo, const std::string& label_a, const std::string& label_b, double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ParameterError("mark_lossy: epsilon must be in [0, 1]");
  const NodeId a = topo.find_node(label_a);
  const NodeId b = topo.find_node(label_b);
  const auto l = topo.find_link(a, b);
  if (!l) throw ConfigError("mark_lossy: no link between '" + label_a + "' and '" + label_b + "'");
  Topology out = topo;
  for (const auto& link : topo.links()) {
    auto& m = out.mutable_link(link.id);
    m.loss_prob = 0.0;
    m.is_lossy = false;
  }
  out.mutable_link(*l).loss_prob = epsilon;
  out.mutable_link(*l).is_lossy = true;
  return out;
}

namespace {

struct ShortestPaths {
  std::vector<double> dist;
  std::vector<std::optional<LinkId>> via;  // link used to reach each node
};

ShortestPaths dijkstra(const Topology& topo, NodeId source, std::optional<LinkId> banned_link,
                       const std::vector<bool>& banned_nodes) {
  const double inf = std::numeric_limits<double>::infinity();
  ShortestPaths sp{std::vector<double>(topo.nodes().size(), inf), std::vector<std::optional<LinkId>>(topo.nodes().size())};
  using Entry = std::pair<double, NodeId>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> pq;
  sp.dist[source] = 0.0;
  pq.push({0.0, source});
  std::vector<bool> done(topo.nodes().size(), false);
  while (!pq.empty()) {
    const auto [d, u] = pq.top();
    pq.pop();
    if (done[u]) continue;
    done[u] = true;
    for (LinkId l : topo.incident(u)) {
      if (banned_link && *banned_link == l) continue;
      const auto& link = topo.link(l);
      const NodeId v = link.other(u);
      if (!banned_nodes.empty() && banned_nodes[v]) continue;
      const double nd = d + link.latency_s;
      if (nd < sp.dist[v]) {
        sp.dist[v] = nd;
        sp.via[v] = l;
        pq.push({nd, v});
      }
    }
  }
  return sp;
}

// Node sequence from the dijkstra source to `target`; empty if unreachable.
std::vector<NodeId> trace(const Topology& topo, const ShortestPaths& sp, NodeId source, NodeId target) {
  if (std::isinf(sp.dist[target])) return {};
  std::vector<NodeId> nodes{target};
  NodeId cur = target;
  while (cur != source) {
    cur = topo.link(*sp.via[cur]).other(cur);
    nodes.push_back(cur);
  }
  std::reverse(nodes.begin(), nodes.end());
  return nodes;
}

double path_latency(const Topology& topo, const std::vector<NodeId>& nodes) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    // Cheapest parallel link, matching what dijkstra relaxed.
    double best = std::numeric_limits<double>::infinity();
    for (LinkId l : topo.incident(nodes[i]))
      if (topo.link(l).other(nodes[i]) == nodes[i + 1]) best = std::min(best, topo.link(l).latency_s);
    s += best;
  }
  return s;
}

// Shortest simple path that crosses `lossy` from x to y: source ~> x -> y ~> destination.
std::vector<NodeId> via_link(const Topology& topo, NodeId src, NodeId dst, LinkId lossy, NodeId x, NodeId y) {
  const std::size_t count = topo.nodes().size();
  std::vector<NodeId> best;
  double best_latency = std::numeric_limits<double>::infinity();
  auto consider = [&](std::vector<NodeId> head, std::vector<NodeId> tail) {
    if (head.empty() || tail.empty()) return;
    std::set<NodeId> seen(head.begin(), head.end());
    for (NodeId v : tail)
      if (!seen.insert(v).second) return;
    head.insert(head.end(), tail.begin(), tail.end());
    const double lat = path_latency(topo, head);
    if (lat < best_latency) {
      best_latency = lat;
      best = std::move(head);
    }
  };

  std::vector<bool> ban_y(count, false), ban_x(count, false);
  ban_y[y] = true;
  ban_x[x] = true;
  const auto head = trace(topo, dijkstra(topo, src, lossy, ban_y), src, x);
  const auto tail = trace(topo, dijkstra(topo, y, lossy, ban_x), y, dst);
  consider(head, tail);
  if (!best.empty() || head.empty() || tail.empty()) return best;

  // Overlapping halves: keep one half fixed and route the other around it.
  std::vector<bool> ban_head(count, false), ban_tail(count, false);
  for (NodeId v : head) ban_head[v] = true;
  for (NodeId v : tail) ban_tail[v] = true;
  consider(head, trace(topo, dijkstra(topo, y, lossy, ban_head), y, dst));
  consider(trace(topo, dijkstra(topo, src, lossy, ban_tail), src, x), tail);
  return best;
}

}  // namespace

std::vector<RoutedFlow> route(const Topology& topo, const std::vector<FlowSpec>& flows, RoutingMode mode) {
  const auto lossy = topo.lossy_link();
  if (mode == RoutingMode::kThroughLossy && !lossy)
    throw RoutingError("route: through-lossy routing needs a lossy link");

  std::vector<RoutedFlow> out;
  for (const auto& f : flows) {
    if (f.source >= topo.nodes().size() || f.destination >= topo.nodes().size())
      throw RoutingError("route: flow endpoint does not exist");
    if (f.source == f.destination) throw RoutingError("route: flow source equals destination");
    if (!(f.lambda > 0.0)) throw ParameterError("route: flow lambda must be positive");
    const std::string name = topo.node(f.source).label + " -> " + topo.node(f.destination).label;

    std::vector<NodeId> nodes;
    if (mode == RoutingMode::kShortest) {
      nodes = trace(topo, dijkstra(topo, f.source, std::nullopt, {}), f.source, f.destination);
    } else {
      const auto& l = topo.link(*lossy);
      auto forward = via_link(topo, f.source, f.destination, *lossy, l.a, l.b);
      auto backward = via_link(topo, f.source, f.destination, *lossy, l.b, l.a);
      if (!forward.empty() && (backward.empty() || path_latency(topo, forward) <= path_latency(topo, backward)))
        nodes = std::move(forward);
      else
        nodes = std::move(backward);
    }
    if (nodes.empty()) throw RoutingError("route: no path for flow " + name);

    RoutedFlow rf;
    rf.spec = f;
    rf.nodes = nodes;
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
      std::optional<LinkId> pick;
      for (LinkId l : topo.incident(nodes[i])) {
        if (topo.link(l).other(nodes[i]) != nodes[i + 1]) continue;
        if (mode == RoutingMode::kThroughLossy && l == *lossy) {
          pick = l;  // via_link only places the endpoints side by side at the lossy hop
          break;
        }
        if (!pick || topo.link(l).latency_s < topo.link(*pick).latency_s) pick = l;
      }
      const auto& link = topo.link(*pick);
      rf.path.push_back({*pick, link.a == nodes[i] ? 0 : 1});
      if (link.is_lossy) {
        rf.crosses_lossy = true;
        rf.lossy_hop = i;
      } else {
        ++rf.eta;
      }
    }
    if (lossy && !rf.crosses_lossy)
      throw RoutingError("route: flow " + name + " does not cross the lossy link");
    out.push_back(std::move(rf));
  }
  return out;
}

double mean_utilization(const Topology& topo, const std::vector<RoutedFlow>& routed, std::uint32_t packet_bytes) {
  std::map<std::pair<LinkId, int>, double> bits;  // per direction
  for (const auto& rf : routed)
    for (const auto& h : rf.path) bits[{h.link, h.direction}] += rf.spec.lambda * packet_bytes * 8.0;
  if (bits.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [key, b] : bits) sum += b / topo.link(key.first).rate_bps;
  return sum / static_cast<double>(bits.size());
}

std::vector<RoutedFlow> normalize_load(const Topology& topo, std::vector<RoutedFlow> routed, double target,
                                       std::uint32_t packet_bytes) {
  if (!(target > 0.0 && target < 1.0)) throw ParameterError("normalize_load: target must be in (0, 1)");
  const double now = mean_utilization(topo, routed, packet_bytes);
  if (!(now > 0.0)) throw ParameterError("normalize_load: no traffic to normalize");
  const double factor = target / now;
  for (auto& rf : routed) rf.spec.lambda *= factor;
  return routed;
}

FlowEnsemble to_ensemble(const std::vector<RoutedFlow>& routed) {
  FlowEnsemble e;
  for (const auto& rf : routed) e.flows.push_back({rf.spec.lambda, rf.eta});
  return e;
}

}  // namespace linc
