#pragma once

#include "kintree/assembly.hpp"
#include "kintree/sdf.hpp"

#include <json.hpp>

#include <optional>
#include <span>
#include <vector>

namespace kintree {

struct ContactConfig {
  double epsilon = 0.01;       // contact tolerance, assembly units
  std::size_t samples_per_part = 4096;
  double d_max = 0.25;         // attachment bound for disconnected components
  std::uint64_t seed = 11;

  /// Defaults scaled to an assembly diagonal.
  static ContactConfig for_diagonal(double diagonal);
  void validate() const;
};

struct ContactEdge {
  PartId u = 0;  // u < v
  PartId v = 0;
  double distance = 0.0;
  double strength = 0.0;
  bool is_virtual = false;  // added to join disconnected components
};

/// Undirected contact graph. Edges are kept sorted by (u, v) with u < v.
class ConnectionGraph {
 public:
  ConnectionGraph() = default;
  explicit ConnectionGraph(std::size_t node_count) : adjacency_(node_count) {}

  std::size_t node_count() const { return adjacency_.size(); }
  const std::vector<ContactEdge>& edges() const { return edges_; }
  /// Neighbor ids in ascending order.
  const std::vector<PartId>& neighbors(PartId n) const { return adjacency_.at(n); }
  std::size_t degree(PartId n) const { return adjacency_.at(n).size(); }

  void add_edge(ContactEdge e);
  bool has_edge(PartId a, PartId b) const { return find(a, b) != nullptr; }
  const ContactEdge* find(PartId a, PartId b) const;
  /// Contact strength of (a,b); 0 for virtual or absent edges.
  double strength(PartId a, PartId b) const;

  nlohmann::json to_json() const;
  static ConnectionGraph from_json(const nlohmann::json& j);

 private:
  std::vector<ContactEdge> edges_;
  std::vector<std::vector<PartId>> adjacency_;
};

double contact_strength(double distance, double epsilon);

double bidirectional_min_distance(std::span<const Vec3> samples_a, const SdfField& sdf_a,
                                  std::span<const Vec3> samples_b, const SdfField& sdf_b);
double bidirectional_min_distance(const PartRecord& a, const SdfField& sdf_a, const PartRecord& b,
                                  const SdfField& sdf_b, std::size_t n_samples,
                                  std::uint64_t seed = 11);

ConnectionGraph build_connection_graph(std::span<const PartRecord> parts,
                                       std::span<const SdfField> sdfs, const ContactConfig& config);
/// Same, from precomputed per-part surface samples.
ConnectionGraph build_connection_graph(std::span<const std::vector<Vec3>> samples,
                                       std::span<const SdfField> sdfs, const ContactConfig& config);

}  // namespace kintree
