#pragma once

#include "kintree/kinematics.hpp"
#include "kintree/sdf.hpp"

#include <json.hpp>

#include <optional>
#include <span>
#include <vector>

namespace kintree {

struct ContactRegion {
  std::vector<Vec3> points;
  std::vector<double> weights;   // in (0, 1]
  Vec3 centroid = Vec3::Zero();  // mu_c
  Mat3 covariance = Mat3::Zero();
  Vec3 normal = Vec3::UnitZ();   // unit
  Vec3 eigenvalues = Vec3::Zero();           // ascending
  Mat3 principal_axes = Mat3::Identity();    // columns match eigenvalues
  Vec3 u_pca = Vec3::UnitZ();                // smallest-variance direction
  Vec3 u_perp = Vec3::UnitX();               // unit, orthogonal to u_pca
};

/// Points of either set whose nearest neighbour in the other set lies within
/// tau_c, weighted by exp(-d^2 / (2 decay_scale^2)). Throws NoContact if empty.
ContactRegion extract_contact_region(std::span<const Vec3> parent_samples, std::span<const Vec3> child_samples,
                                     double tau_c, double decay_scale);
/// Single-point region at the midpoint of the closest sample pair.
ContactRegion closest_pair_region(std::span<const Vec3> parent_samples, std::span<const Vec3> child_samples);

enum class MotionKind { Revolute, Prismatic };
std::string_view to_string(MotionKind k);

struct LossBreakdown {
  std::vector<double> cons;  // one per motion in Theta
  std::vector<double> coll;
  double reg = 0.0;
};

struct JointCandidate {
  MotionKind kind = MotionKind::Revolute;
  Vec3 pivot = Vec3::Zero();
  Vec3 raw_axis = Vec3::UnitZ();
  double objective = 0.0;
  double score = 1.0;
  LossBreakdown breakdown;
  int index = 0;  // position in the generated pool, used for stable ties

  Vec3 axis() const { return raw_axis.normalized(); }
};

inline double score_from_objective(double objective) { return 1.0 / (1.0 + objective); }

struct DwCavlConfig {
  double m_vol = 0.005;
  double k_sharp = 200.0;
  double sigma_c = 0.01;
  double eps_small = 1e-9;
  double lambda_c = 1.0;
  double lambda_coll = 1.0;
  double lambda_p = 0.1;
  /// Distances in the objective are divided by this scale. 1 gives the plain formulas.
  double length_scale = 1.0;
  bool anchor = true;  // false: lambda_p = 0 and w_dist = 1
  std::vector<double> revolute_motions{-0.3490658503988659, -0.17453292519943295, -0.08726646259971647,
                                       0.08726646259971647, 0.17453292519943295,  0.3490658503988659};
  std::vector<double> prismatic_motions{-0.05, -0.02, 0.02, 0.05};
  int n_random_axes = 4;
  int n_slide = 2;
  double slide_step = 0.02;
  int top_k = 5;
  double zeta = 1.1;
  double s_min = 0.25;
  double p_conf = 0.8;
  double tau_c = 0.02;
  double decay_scale = 0.02;
  std::size_t samples_per_part = 2048;
  std::size_t coarse_samples = 256;
  int iterations = 200;
  double axis_step = 0.05;
  double pivot_step = 0.02;
  std::uint64_t seed = 23;

  /// Defaults scaled to an assembly diagonal and contact tolerance.
  static DwCavlConfig for_diagonal(double diagonal, double contact_epsilon);
  void validate() const;
  const std::vector<double>& motions(MotionKind k) const {
    return k == MotionKind::Revolute ? revolute_motions : prismatic_motions;
  }
};

Mat3 cross_matrix(const Vec3& u);
/// R(u, theta) = cos I + sin [u]x + (1 - cos) u u^T.
Mat3 rodrigues(const Vec3& u, double theta);
std::vector<Vec3> rotate_points(std::span<const Vec3> points, const Vec3& pivot, const Vec3& axis, double theta);
std::vector<Vec3> translate_points(std::span<const Vec3> points, const Vec3& axis, double t);
/// d(a/|a|)/da. Throws DegenerateAxis when |a| <= 1e-12.
Mat3 axis_jacobian(const Vec3& a);

double sigmoid(double z);
double volumetric_weight(double s0, const DwCavlConfig& c);  // w_vol
double distance_weight(double s0, const DwCavlConfig& c);    // w_dist (1 without anchor)
double inverse_volumetric_weight(double s0, const DwCavlConfig& c);

/// Child samples with their rest-pose field values and weights.
struct PreparedSamples {
  std::vector<Vec3> points;
  std::vector<double> s0;
  std::vector<double> w;        // w_vol * w_dist
  std::vector<double> w_tilde;
  double w_sum = 0.0;
  double w_tilde_sum = 0.0;
};
PreparedSamples prepare_samples(std::span<const Vec3> child_samples, const SdfField& parent_sdf,
                                const DwCavlConfig& config);
PreparedSamples subsample(const PreparedSamples& s, std::size_t count);

struct MotionLosses {
  double cons = 0.0;
  double coll = 0.0;
};
MotionLosses dwcavl_losses(const JointCandidate& candidate, const PreparedSamples& samples,
                           const SdfField& parent_sdf, double delta, const DwCavlConfig& config);

struct ObjectiveValue {
  double value = 0.0;
  LossBreakdown breakdown;
  Vec3 grad_pivot = Vec3::Zero();
  Vec3 grad_raw_axis = Vec3::Zero();
};
/// J = mean over Theta of (lambda_c L_cons + lambda_coll L_coll) + L_reg (revolute only).
ObjectiveValue total_objective(const JointCandidate& candidate, const PreparedSamples& samples,
                               const SdfField& parent_sdf, const Vec3& mu_c, const DwCavlConfig& config,
                               bool with_gradient = false);

/// Evaluates the objective in place and fills score and breakdown.
void evaluate_candidate(JointCandidate& candidate, const PreparedSamples& samples, const SdfField& parent_sdf,
                        const Vec3& mu_c, const DwCavlConfig& config);

/// Normalized-gradient descent with backtracking over (p, a) or (a). Never
/// increases J. Throws NonFinite if the objective stops being finite.
JointCandidate optimize_candidate(JointCandidate candidate, const PreparedSamples& samples,
                                  const SdfField& parent_sdf, const Vec3& mu_c, const DwCavlConfig& config);

/// Axis pool: u_pca, n, u_perp, the principal axes and random directions,
/// deduplicated up to sign.
std::vector<Vec3> candidate_axes(const ContactRegion& region, const DwCavlConfig& config);
/// Revolute candidates get 2 n_slide + 1 pivots per axis; prismatic ones one each.
std::vector<JointCandidate> generate_candidates(const ContactRegion& region, const DwCavlConfig& config);

struct RankedCandidates {
  std::optional<JointCandidate> best_revolute;
  std::optional<JointCandidate> best_prismatic;
  std::vector<JointCandidate> refined;
  double s_rev() const { return best_revolute ? best_revolute->score : 0.0; }
  double s_pri() const { return best_prismatic ? best_prismatic->score : 0.0; }
};
/// Coarse scores every candidate on a subsample, refines the best top_k of each
/// kind on all samples, keeps the best score per kind.
RankedCandidates rank_and_refine(std::span<const JointCandidate> candidates, const PreparedSamples& samples,
                                 const SdfField& parent_sdf, const Vec3& mu_c, const DwCavlConfig& config);

// ---------------------------------------------------------------------------
// Type decision

struct TypeDistribution {
  double fixed = 0.0;
  double revolute = 0.0;
  double prismatic = 0.0;
  double abstain = 1.0;
};

struct JointFeatures {
  PartId parent = 0;
  PartId child = 0;
  double s_rev = 0.0;
  double s_pri = 0.0;
  Vec3 contact_centroid = Vec3::Zero();
  Vec3 contact_normal = Vec3::UnitZ();
  std::size_t contact_points = 0;
};

/// Source of an external joint-type opinion. Returning nullopt abstains.
class JointTypePrior {
 public:
  virtual ~JointTypePrior() = default;
  virtual std::optional<TypeDistribution> query(const JointFeatures& features) const = 0;
};

class AbstainPrior final : public JointTypePrior {
 public:
  std::optional<TypeDistribution> query(const JointFeatures&) const override { return std::nullopt; }
};

JointType classify_joint(double s_rev, double s_pri, const std::optional<TypeDistribution>& prior,
                         const DwCavlConfig& config);

// ---------------------------------------------------------------------------
// Per-edge estimation

struct EdgeJointResult {
  PartId parent = 0;
  PartId child = 0;
  JointSpec spec;
  RankedCandidates ranked;
  bool fallback_region = false;
  std::size_t contact_points = 0;

  nlohmann::json diagnostics() const;
};

/// Joint spec for `candidate` (or fixed) with the given origin.
JointSpec spec_from(JointType type, const RankedCandidates& ranked, const Vec3& origin);

EdgeJointResult estimate_joint(const PartRecord& parent, const SdfField& parent_sdf, const PartRecord& child,
                               const DwCavlConfig& config, const JointTypePrior& prior);

/// Majority type per multi-member child cluster; ties keep the original types.
std::vector<JointType> majority_types(const KinematicTree& tree, const SymmetryClusters& clusters,
                                      std::span<const JointType> types);
/// Applies majority_types; corrected joints take the optimized parameters of
/// the imposed kind. `results` is parallel to tree.edges().
void harmonize_types(const KinematicTree& tree, const SymmetryClusters& clusters,
                     std::span<EdgeJointResult> results);

/// Flips an axis so that its largest-magnitude component is positive.
Vec3 canonical_axis(const Vec3& u);

}  // namespace kintree
