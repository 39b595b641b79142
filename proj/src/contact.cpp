#include "kintree/contact.hpp"

#include "kintree/error.hpp"

#include <algorithm>
#include <cmath>

namespace kintree {

ContactConfig ContactConfig::for_diagonal(double diagonal) {
  ContactConfig c;
  c.epsilon = 0.01 * diagonal;
  c.d_max = 0.25 * diagonal;
  return c;
}

void ContactConfig::validate() const {
  if (!(epsilon > 0)) throw Error(ErrorCode::InvalidInput, "contact epsilon must be > 0");
  if (!(d_max > 0)) throw Error(ErrorCode::InvalidInput, "d_max must be > 0");
  if (samples_per_part == 0) throw Error(ErrorCode::InvalidInput, "samples_per_part must be > 0");
}

void ConnectionGraph::add_edge(ContactEdge e) {
  if (e.u == e.v) throw Error(ErrorCode::InvalidInput, "self-loop in connection graph");
  if (e.u > e.v) std::swap(e.u, e.v);
  const auto n = static_cast<PartId>(adjacency_.size());
  if (e.u < 0 || e.v >= n) throw Error(ErrorCode::InvalidInput, "edge references unknown node");
  if (has_edge(e.u, e.v)) throw Error(ErrorCode::InvalidInput, "duplicate edge");
  auto pos = std::lower_bound(edges_.begin(), edges_.end(), e, [](const auto& a, const auto& b) {
    return std::tie(a.u, a.v) < std::tie(b.u, b.v);
  });
  edges_.insert(pos, e);
  auto insert_sorted = [](std::vector<PartId>& v, PartId x) { v.insert(std::lower_bound(v.begin(), v.end(), x), x); };
  insert_sorted(adjacency_[e.u], e.v);
  insert_sorted(adjacency_[e.v], e.u);
}

const ContactEdge* ConnectionGraph::find(PartId a, PartId b) const {
  if (a > b) std::swap(a, b);
  auto it = std::lower_bound(edges_.begin(), edges_.end(), std::make_pair(a, b),
                             [](const ContactEdge& e, const std::pair<PartId, PartId>& k) {
                               return std::tie(e.u, e.v) < std::tie(k.first, k.second);
                             });
  if (it != edges_.end() && it->u == a && it->v == b) return &*it;
  return nullptr;
}

double ConnectionGraph::strength(PartId a, PartId b) const {
  const ContactEdge* e = find(a, b);
  return (e && !e->is_virtual) ? e->strength : 0.0;
}

nlohmann::json ConnectionGraph::to_json() const {
  nlohmann::json j;
  j["nodes"] = nlohmann::json::array();
  for (std::size_t i = 0; i < node_count(); ++i) j["nodes"].push_back(i);
  j["edges"] = nlohmann::json::array();
  for (const auto& e : edges_) {
    nlohmann::json ej = {{"u", e.u}, {"v", e.v}, {"distance", e.distance}, {"strength", e.strength}};
    if (e.is_virtual) ej["virtual"] = true;
    j["edges"].push_back(ej);
  }
  return j;
}

ConnectionGraph ConnectionGraph::from_json(const nlohmann::json& j) {
  try {
    ConnectionGraph g(j.at("nodes").size());
    for (const auto& e : j.at("edges"))
      g.add_edge({e.at("u").get<int>(), e.at("v").get<int>(), e.at("distance").get<double>(),
                  e.at("strength").get<double>(), e.value("virtual", false)});
    return g;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::ParseError, ex.what());
  }
}

double contact_strength(double distance, double epsilon) {
  return std::clamp(1.0 - distance / epsilon, 0.0, 1.0);
}

double bidirectional_min_distance(std::span<const Vec3> samples_a, const SdfField& sdf_a,
                                  std::span<const Vec3> samples_b, const SdfField& sdf_b) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : samples_a) best = std::min(best, std::abs(sdf_b.value(p)));
  for (const auto& p : samples_b) best = std::min(best, std::abs(sdf_a.value(p)));
  return best;
}

double bidirectional_min_distance(const PartRecord& a, const SdfField& sdf_a, const PartRecord& b,
                                  const SdfField& sdf_b, std::size_t n_samples, std::uint64_t seed) {
  if (n_samples == 0) throw Error(ErrorCode::InvalidInput, "n_samples must be > 0");
  auto sa = sample_surface_points(a.mesh, n_samples, seed);
  auto sb = sample_surface_points(b.mesh, n_samples, seed);
  return bidirectional_min_distance(sa, sdf_a, sb, sdf_b);
}

ConnectionGraph build_connection_graph(std::span<const std::vector<Vec3>> samples,
                                       std::span<const SdfField> sdfs, const ContactConfig& config) {
  config.validate();
  if (samples.size() != sdfs.size()) throw Error(ErrorCode::InvalidInput, "samples/SDF count mismatch");
  const std::size_t n = samples.size();
  ConnectionGraph g(n);
  std::vector<Aabb> boxes(n);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& p : samples[i]) boxes[i].extend(p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      // Separated bounding boxes bound the distance from below; allow for grid error.
      Vec3 gap = (boxes[i].min - boxes[j].max).cwiseMax(boxes[j].min - boxes[i].max).cwiseMax(Vec3::Zero());
      if (gap.norm() > config.epsilon + 2.0 * std::max(sdfs[i].cell_size(), sdfs[j].cell_size())) continue;
      double d = bidirectional_min_distance(samples[i], sdfs[i], samples[j], sdfs[j]);
      if (d <= config.epsilon)
        g.add_edge({static_cast<PartId>(i), static_cast<PartId>(j), d,
                    contact_strength(d, config.epsilon), false});
    }
  return g;
}

ConnectionGraph build_connection_graph(std::span<const PartRecord> parts,
                                       std::span<const SdfField> sdfs, const ContactConfig& config) {
  std::vector<std::vector<Vec3>> samples;
  samples.reserve(parts.size());
  for (const auto& p : parts) samples.push_back(sample_surface_points(p.mesh, config.samples_per_part, config.seed));
  return build_connection_graph(std::span<const std::vector<Vec3>>(samples), sdfs, config);
}

}  // namespace kintree
