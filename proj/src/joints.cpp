#include "kintree/joints.hpp"

#include "kintree/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace kintree {

std::string_view to_string(MotionKind k) { return k == MotionKind::Revolute ? "revolute" : "prismatic"; }

Vec3 canonical_axis(const Vec3& u) {
  Eigen::Index i;
  u.cwiseAbs().maxCoeff(&i);
  return u[i] < 0 ? Vec3(-u) : u;
}

// ---------------------------------------------------------------------------
// Contact region

namespace {

struct Nearest {
  std::vector<double> dist;
  std::vector<int> index;
};

Nearest nearest_neighbors(std::span<const Vec3> from, std::span<const Vec3> to) {
  Nearest n{std::vector<double>(from.size()), std::vector<int>(from.size())};
  for (std::size_t i = 0; i < from.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (std::size_t j = 0; j < to.size(); ++j) {
      double d = (from[i] - to[j]).squaredNorm();
      if (d < best) {
        best = d;
        arg = static_cast<int>(j);
      }
    }
    n.dist[i] = std::sqrt(best);
    n.index[i] = arg;
  }
  return n;
}

void finish_region(ContactRegion& r, const Vec3& diff_sum) {
  double wsum = std::accumulate(r.weights.begin(), r.weights.end(), 0.0);
  r.centroid.setZero();
  for (std::size_t i = 0; i < r.points.size(); ++i) r.centroid += r.weights[i] * r.points[i];
  r.centroid /= wsum;
  r.covariance.setZero();
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    Vec3 d = r.points[i] - r.centroid;
    r.covariance += r.weights[i] * d * d.transpose();
  }
  r.covariance /= wsum;
  r.covariance = 0.5 * (r.covariance + r.covariance.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Mat3> eig(r.covariance);
  r.eigenvalues = eig.eigenvalues();
  r.principal_axes = eig.eigenvectors();
  for (int c = 0; c < 3; ++c) r.principal_axes.col(c) = canonical_axis(r.principal_axes.col(c));
  r.u_pca = r.principal_axes.col(0);
  double n = diff_sum.norm();
  // Symmetric contacts (e.g. coaxial cylinders) cancel out; use the flattest direction.
  r.normal = n > 1e-12 * static_cast<double>(r.points.size()) ? Vec3(diff_sum / n) : r.u_pca;
  Vec3 perp = r.u_pca.cross(r.normal);
  if (perp.norm() < 1e-6) perp = r.principal_axes.col(2);
  r.u_perp = canonical_axis(perp.normalized());
}

}  // namespace

ContactRegion extract_contact_region(std::span<const Vec3> parent_samples, std::span<const Vec3> child_samples,
                                     double tau_c, double decay_scale) {
  if (parent_samples.empty() || child_samples.empty())
    throw Error(ErrorCode::EmptyPointSet, "contact region needs samples on both parts");
  if (!(tau_c > 0) || !(decay_scale > 0)) throw Error(ErrorCode::InvalidInput, "tau_c and decay_scale must be > 0");
  auto pn = nearest_neighbors(parent_samples, child_samples);
  auto cn = nearest_neighbors(child_samples, parent_samples);
  ContactRegion r;
  Vec3 diff = Vec3::Zero();
  auto weight = [&](double d) { return std::exp(-d * d / (2.0 * decay_scale * decay_scale)); };
  for (std::size_t i = 0; i < parent_samples.size(); ++i)
    if (pn.dist[i] <= tau_c) {
      r.points.push_back(parent_samples[i]);
      r.weights.push_back(weight(pn.dist[i]));
      diff += child_samples[pn.index[i]] - parent_samples[i];
    }
  for (std::size_t i = 0; i < child_samples.size(); ++i)
    if (cn.dist[i] <= tau_c) {
      r.points.push_back(child_samples[i]);
      r.weights.push_back(weight(cn.dist[i]));
      diff += child_samples[i] - parent_samples[cn.index[i]];
    }
  if (r.points.empty()) throw Error(ErrorCode::NoContact, "no sample pair within tau_c");
  finish_region(r, diff / static_cast<double>(r.points.size()));
  return r;
}

ContactRegion closest_pair_region(std::span<const Vec3> parent_samples, std::span<const Vec3> child_samples) {
  if (parent_samples.empty() || child_samples.empty())
    throw Error(ErrorCode::EmptyPointSet, "contact region needs samples on both parts");
  auto pn = nearest_neighbors(parent_samples, child_samples);
  std::size_t best = static_cast<std::size_t>(std::min_element(pn.dist.begin(), pn.dist.end()) - pn.dist.begin());
  const Vec3& a = parent_samples[best];
  const Vec3& b = child_samples[pn.index[best]];
  ContactRegion r;
  r.points = {0.5 * (a + b)};
  r.weights = {1.0};
  finish_region(r, b - a);
  return r;
}

// ---------------------------------------------------------------------------
// Configuration

DwCavlConfig DwCavlConfig::for_diagonal(double d, double contact_epsilon) {
  DwCavlConfig c;
  c.m_vol = 0.005 * d;
  c.k_sharp = 200.0 / d;
  c.sigma_c = 0.01 * d;
  c.length_scale = c.m_vol;
  c.prismatic_motions = {-0.05 * d, -0.02 * d, 0.02 * d, 0.05 * d};
  c.slide_step = 0.02 * d;
  c.pivot_step = 0.02 * d;
  c.tau_c = 2.0 * contact_epsilon;
  c.decay_scale = c.tau_c;
  return c;
}

void DwCavlConfig::validate() const {
  auto positive = [](double x, const char* name) {
    if (!(x > 0) || !std::isfinite(x)) throw Error(ErrorCode::InvalidInput, std::string(name) + " must be > 0");
  };
  auto non_negative = [](double x, const char* name) {
    if (!(x >= 0) || !std::isfinite(x)) throw Error(ErrorCode::InvalidInput, std::string(name) + " must be >= 0");
  };
  positive(m_vol, "m_vol");
  positive(k_sharp, "k_sharp");
  positive(sigma_c, "sigma_c");
  positive(eps_small, "eps_small");
  positive(length_scale, "length_scale");
  positive(zeta, "zeta");
  positive(tau_c, "tau_c");
  positive(decay_scale, "decay_scale");
  positive(axis_step, "axis_step");
  positive(pivot_step, "pivot_step");
  non_negative(lambda_c, "lambda_c");
  non_negative(lambda_coll, "lambda_coll");
  non_negative(lambda_p, "lambda_p");
  non_negative(slide_step, "slide_step");
  if (revolute_motions.empty() || prismatic_motions.empty())
    throw Error(ErrorCode::InvalidInput, "virtual motion sets must be non-empty");
  if (!(s_min > 0 && s_min < 1)) throw Error(ErrorCode::InvalidInput, "s_min must be in (0,1)");
  if (!(p_conf > 0 && p_conf <= 1)) throw Error(ErrorCode::InvalidInput, "p_conf must be in (0,1]");
  if (top_k < 1 || n_random_axes < 0 || n_slide < 0 || iterations < 0)
    throw Error(ErrorCode::InvalidInput, "invalid candidate pool sizes");
  if (samples_per_part == 0 || coarse_samples == 0) throw Error(ErrorCode::InvalidInput, "sample counts must be > 0");
}

// ---------------------------------------------------------------------------
// Rigid motions

Mat3 cross_matrix(const Vec3& u) {
  Mat3 m;
  m << 0, -u.z(), u.y(), u.z(), 0, -u.x(), -u.y(), u.x(), 0;
  return m;
}

Mat3 rodrigues(const Vec3& u, double theta) {
  return std::cos(theta) * Mat3::Identity() + std::sin(theta) * cross_matrix(u) +
         (1.0 - std::cos(theta)) * u * u.transpose();
}

std::vector<Vec3> rotate_points(std::span<const Vec3> points, const Vec3& pivot, const Vec3& axis, double theta) {
  const Mat3 r = rodrigues(axis, theta);
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& x : points) out.push_back(pivot + r * (x - pivot));
  return out;
}

std::vector<Vec3> translate_points(std::span<const Vec3> points, const Vec3& axis, double t) {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& x : points) out.push_back(x + t * axis);
  return out;
}

Mat3 axis_jacobian(const Vec3& a) {
  const double n = a.norm();
  if (!(n > 1e-12)) throw Error(ErrorCode::DegenerateAxis, "axis norm too small");
  return (Mat3::Identity() - a * a.transpose() / (n * n)) / n;
}

// ---------------------------------------------------------------------------
// Objective

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

double volumetric_weight(double s0, const DwCavlConfig& c) { return sigmoid(-c.k_sharp * (s0 - c.m_vol)); }

double distance_weight(double s0, const DwCavlConfig& c) {
  return c.anchor ? std::exp(-s0 * s0 / (2.0 * c.sigma_c * c.sigma_c)) : 1.0;
}

double inverse_volumetric_weight(double s0, const DwCavlConfig& c) { return sigmoid(c.k_sharp * (s0 - c.m_vol)); }

PreparedSamples prepare_samples(std::span<const Vec3> child_samples, const SdfField& parent_sdf,
                                const DwCavlConfig& config) {
  PreparedSamples s;
  s.points.assign(child_samples.begin(), child_samples.end());
  s.s0 = parent_sdf.query(child_samples);
  for (double v : s.s0) {
    s.w.push_back(volumetric_weight(v, config) * distance_weight(v, config));
    s.w_tilde.push_back(inverse_volumetric_weight(v, config));
  }
  s.w_sum = std::accumulate(s.w.begin(), s.w.end(), 0.0);
  s.w_tilde_sum = std::accumulate(s.w_tilde.begin(), s.w_tilde.end(), 0.0);
  return s;
}

PreparedSamples subsample(const PreparedSamples& s, std::size_t count) {
  if (count >= s.points.size()) return s;
  PreparedSamples out;
  for (std::size_t k = 0; k < count; ++k) {
    std::size_t i = k * s.points.size() / count;
    out.points.push_back(s.points[i]);
    out.s0.push_back(s.s0[i]);
    out.w.push_back(s.w[i]);
    out.w_tilde.push_back(s.w_tilde[i]);
  }
  out.w_sum = std::accumulate(out.w.begin(), out.w.end(), 0.0);
  out.w_tilde_sum = std::accumulate(out.w_tilde.begin(), out.w_tilde.end(), 0.0);
  return out;
}

namespace {

/// Losses for one motion; accumulates d(scale * (lc L_cons + lcoll L_coll))/d(p, u) when grads are given.
MotionLosses motion_losses(MotionKind kind, const Vec3& pivot, const Vec3& u, const PreparedSamples& s,
                           const SdfField& sdf, double delta, const DwCavlConfig& c, double scale, Vec3* grad_p,
                           Vec3* grad_u) {
  const double ell = c.length_scale;
  const double m = c.m_vol;
  const bool rev = kind == MotionKind::Revolute;
  const Mat3 r = rev ? rodrigues(u, delta) : Mat3::Identity();
  const double sn = std::sin(delta), cs = std::cos(delta);
  const double cons_den = s.w_sum + c.eps_small;
  const double coll_den = s.w_tilde_sum + c.eps_small;
  double cons = 0.0, coll = 0.0;
  const bool grads = grad_p || grad_u;
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    const Vec3& x = s.points[i];
    const Vec3 v = x - pivot;
    const Vec3 y = rev ? Vec3(pivot + r * v) : Vec3(x + delta * u);
    Vec3 g;
    const double sd = grads ? sdf.value_and_gradient(y, &g) : sdf.value(y);
    const double rc = std::max(0.0, sd - m) / ell;
    const double rl = std::max(0.0, -sd - m) / ell;
    cons += s.w[i] * rc * rc;
    coll += s.w_tilde[i] * rl * rl;
    if (!grads || (rc == 0.0 && rl == 0.0)) continue;
    // d/dy of the per-point contribution.
    const double dy = scale * (c.lambda_c * 2.0 * s.w[i] * rc / (ell * cons_den) -
                               c.lambda_coll * 2.0 * s.w_tilde[i] * rl / (ell * coll_den));
    const Vec3 gy = dy * g;
    if (rev) {
      if (grad_p) *grad_p += (Mat3::Identity() - r).transpose() * gy;
      if (grad_u) {
        Mat3 ju = -sn * cross_matrix(v) + (1.0 - cs) * (u.dot(v) * Mat3::Identity() + u * v.transpose());
        *grad_u += ju.transpose() * gy;
      }
    } else if (grad_u) {
      *grad_u += delta * gy;
    }
  }
  return {cons / cons_den, coll / coll_den};
}

}  // namespace

MotionLosses dwcavl_losses(const JointCandidate& candidate, const PreparedSamples& samples,
                           const SdfField& parent_sdf, double delta, const DwCavlConfig& config) {
  return motion_losses(candidate.kind, candidate.pivot, candidate.axis(), samples, parent_sdf, delta, config, 1.0,
                       nullptr, nullptr);
}

ObjectiveValue total_objective(const JointCandidate& candidate, const PreparedSamples& samples,
                               const SdfField& parent_sdf, const Vec3& mu_c, const DwCavlConfig& config,
                               bool with_gradient) {
  const Vec3 u = candidate.axis();
  const auto& thetas = config.motions(candidate.kind);
  const double scale = 1.0 / static_cast<double>(thetas.size());
  ObjectiveValue out;
  Vec3 grad_u = Vec3::Zero();
  const bool rev = candidate.kind == MotionKind::Revolute;
  for (double delta : thetas) {
    auto l = motion_losses(candidate.kind, candidate.pivot, u, samples, parent_sdf, delta, config, scale,
                           with_gradient && rev ? &out.grad_pivot : nullptr, with_gradient ? &grad_u : nullptr);
    out.breakdown.cons.push_back(l.cons);
    out.breakdown.coll.push_back(l.coll);
    out.value += scale * (config.lambda_c * l.cons + config.lambda_coll * l.coll);
  }
  if (rev) {
    const double lp = config.anchor ? config.lambda_p : 0.0;
    const double ell2 = config.length_scale * config.length_scale;
    const Vec3 off = candidate.pivot - mu_c;
    out.breakdown.reg = lp * off.squaredNorm() / ell2;
    out.value += out.breakdown.reg;
    if (with_gradient) out.grad_pivot += 2.0 * lp * off / ell2;
  }
  if (with_gradient) out.grad_raw_axis = axis_jacobian(candidate.raw_axis).transpose() * grad_u;
  return out;
}

void evaluate_candidate(JointCandidate& candidate, const PreparedSamples& samples, const SdfField& parent_sdf,
                        const Vec3& mu_c, const DwCavlConfig& config) {
  auto v = total_objective(candidate, samples, parent_sdf, mu_c, config);
  candidate.objective = v.value;
  candidate.score = score_from_objective(v.value);
  candidate.breakdown = std::move(v.breakdown);
}

JointCandidate optimize_candidate(JointCandidate c, const PreparedSamples& samples, const SdfField& parent_sdf,
                                  const Vec3& mu_c, const DwCavlConfig& config) {
  auto check = [](double v) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "objective is not finite");
  };
  c.raw_axis = c.axis();
  auto eval = total_objective(c, samples, parent_sdf, mu_c, config, true);
  check(eval.value);
  const bool rev = c.kind == MotionKind::Revolute;
  double eta_a = config.axis_step, eta_p = config.pivot_step;
  const double min_a = config.axis_step * 1e-6, min_p = config.pivot_step * 1e-6;

  // One backtracking step on a block; returns true when the objective decreased.
  auto try_block = [&](bool axis_block, double& eta, double min_eta) {
    const Vec3 g = axis_block ? eval.grad_raw_axis : eval.grad_pivot;
    const double gn = g.norm();
    if (!(gn > 0) || !std::isfinite(gn)) return false;
    while (eta >= min_eta) {
      JointCandidate trial = c;
      if (axis_block) {
        Vec3 a = c.raw_axis - eta * g / gn;
        if (a.norm() < 1e-12) {
          eta *= 0.5;
          continue;
        }
        trial.raw_axis = a.normalized();
      } else {
        trial.pivot = c.pivot - eta * g / gn;
      }
      auto v = total_objective(trial, samples, parent_sdf, mu_c, config, false);
      check(v.value);
      if (v.value < eval.value) {
        c = trial;
        eval.value = v.value;
        eta = std::min(eta * 1.5, axis_block ? config.axis_step : config.pivot_step);
        return true;
      }
      eta *= 0.5;
    }
    return false;
  };

  for (int it = 0; it < config.iterations; ++it) {
    bool moved = try_block(true, eta_a, min_a);
    if (rev) moved = try_block(false, eta_p, min_p) || moved;
    if (!moved) break;
    eval = total_objective(c, samples, parent_sdf, mu_c, config, true);
    check(eval.value);
  }
  evaluate_candidate(c, samples, parent_sdf, mu_c, config);
  return c;
}

// ---------------------------------------------------------------------------
// Candidates

std::vector<Vec3> candidate_axes(const ContactRegion& region, const DwCavlConfig& config) {
  std::vector<Vec3> pool{region.u_pca, region.normal, region.u_perp, region.principal_axes.col(0),
                         region.principal_axes.col(1), region.principal_axes.col(2)};
  Rng rng(config.seed);
  for (int i = 0; i < config.n_random_axes; ++i) pool.push_back(rng.unit_vector());
  std::vector<Vec3> out;
  for (const Vec3& a : pool) {
    if (!(a.norm() > 1e-12)) continue;
    Vec3 u = canonical_axis(a.normalized());
    bool dup = std::any_of(out.begin(), out.end(), [&](const Vec3& b) { return std::abs(u.dot(b)) > 1.0 - 1e-9; });
    if (!dup) out.push_back(u);
  }
  return out;
}

std::vector<JointCandidate> generate_candidates(const ContactRegion& region, const DwCavlConfig& config) {
  const auto axes = candidate_axes(region, config);
  std::vector<JointCandidate> out;
  int index = 0;
  for (const Vec3& u : axes) {
    for (int j = 0; j <= 2 * config.n_slide; ++j) {
      // Offsets 0, +1, -1, +2, -2, ... steps along the axis.
      int k = (j + 1) / 2 * (j % 2 ? 1 : -1);
      JointCandidate c;
      c.kind = MotionKind::Revolute;
      c.raw_axis = u;
      c.pivot = region.centroid + k * config.slide_step * u;
      c.index = index++;
      out.push_back(c);
    }
  }
  for (const Vec3& u : axes) {
    JointCandidate c;
    c.kind = MotionKind::Prismatic;
    c.raw_axis = u;
    c.pivot = region.centroid;
    c.index = index++;
    out.push_back(c);
  }
  return out;
}

RankedCandidates rank_and_refine(std::span<const JointCandidate> candidates, const PreparedSamples& samples,
                                 const SdfField& parent_sdf, const Vec3& mu_c, const DwCavlConfig& config) {
  const PreparedSamples coarse = subsample(samples, config.coarse_samples);
  RankedCandidates out;
  for (MotionKind kind : {MotionKind::Revolute, MotionKind::Prismatic}) {
    std::vector<JointCandidate> pool;
    for (const auto& c : candidates)
      if (c.kind == kind) pool.push_back(c);
    for (auto& c : pool) evaluate_candidate(c, coarse, parent_sdf, mu_c, config);
    std::stable_sort(pool.begin(), pool.end(), [](const JointCandidate& a, const JointCandidate& b) {
      return a.objective < b.objective || (a.objective == b.objective && a.index < b.index);
    });
    std::optional<JointCandidate>& best = kind == MotionKind::Revolute ? out.best_revolute : out.best_prismatic;
    std::size_t keep = std::min<std::size_t>(pool.size(), static_cast<std::size_t>(config.top_k));
    for (std::size_t i = 0; i < keep; ++i) {
      JointCandidate refined;
      try {
        refined = optimize_candidate(pool[i], samples, parent_sdf, mu_c, config);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::NonFinite) continue;  // discarded
        throw;
      }
      out.refined.push_back(refined);
      if (!best || refined.score > best->score || (refined.score == best->score && refined.index < best->index))
        best = refined;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Type decision

JointType classify_joint(double s_rev, double s_pri, const std::optional<TypeDistribution>& prior,
                         const DwCavlConfig& config) {
  if (prior) {
    const std::pair<double, int> options[] = {
        {prior->fixed, 0}, {prior->revolute, 1}, {prior->prismatic, 2}, {prior->abstain, 3}};
    auto best = *std::max_element(std::begin(options), std::end(options),
                                  [](const auto& a, const auto& b) { return a.first < b.first; });
    if (best.second != 3 && best.first >= config.p_conf)
      return best.second == 0 ? JointType::Fixed : best.second == 1 ? JointType::Revolute : JointType::Prismatic;
  }
  if (s_rev > config.zeta * s_pri && s_rev >= config.s_min) return JointType::Revolute;
  if (s_pri >= config.s_min) return JointType::Prismatic;
  return JointType::Fixed;
}

JointSpec spec_from(JointType type, const RankedCandidates& ranked, const Vec3& origin) {
  JointSpec s;
  s.origin = origin;
  if (type == JointType::Revolute && ranked.best_revolute) {
    s.type = JointType::Revolute;
    s.axis = canonical_axis(ranked.best_revolute->axis());
    s.pivot = ranked.best_revolute->pivot;
    s.score = ranked.best_revolute->score;
  } else if (type == JointType::Prismatic && ranked.best_prismatic) {
    s.type = JointType::Prismatic;
    s.axis = canonical_axis(ranked.best_prismatic->axis());
    s.score = ranked.best_prismatic->score;
  } else {
    s.type = JointType::Fixed;
    s.score = std::max(ranked.s_rev(), ranked.s_pri());
  }
  return s;
}

namespace {

nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

nlohmann::json candidate_json(const JointCandidate& c) {
  nlohmann::json j;
  j["index"] = c.index;
  j["kind"] = std::string(to_string(c.kind));
  if (c.kind == MotionKind::Revolute) j["pivot"] = vec_json(c.pivot);
  j["axis"] = vec_json(c.axis());
  j["objective"] = c.objective;
  j["score"] = c.score;
  j["breakdown"] = {{"cons", c.breakdown.cons}, {"coll", c.breakdown.coll}, {"reg", c.breakdown.reg}};
  return j;
}

}  // namespace

nlohmann::json EdgeJointResult::diagnostics() const {
  nlohmann::json j;
  j["edge"] = {parent, child};
  j["candidates"] = nlohmann::json::array();
  for (const auto& c : ranked.refined) j["candidates"].push_back(candidate_json(c));
  j["s_rev"] = ranked.s_rev();
  j["s_pri"] = ranked.s_pri();
  j["fallback_region"] = fallback_region;
  j["contact_points"] = contact_points;
  nlohmann::json chosen{{"type", std::string(to_string(spec.type))}, {"score", spec.score}};
  if (spec.axis) chosen["axis"] = vec_json(*spec.axis);
  if (spec.pivot) chosen["pivot"] = vec_json(*spec.pivot);
  j["chosen"] = chosen;
  return j;
}

EdgeJointResult estimate_joint(const PartRecord& parent, const SdfField& parent_sdf, const PartRecord& child,
                               const DwCavlConfig& config, const JointTypePrior& prior) {
  config.validate();
  EdgeJointResult r;
  r.parent = parent.id;
  r.child = child.id;
  auto ps = sample_surface_points(parent.mesh, config.samples_per_part, config.seed);
  auto cs = sample_surface_points(child.mesh, config.samples_per_part, config.seed + 1);
  ContactRegion region;
  try {
    region = extract_contact_region(ps, cs, config.tau_c, config.decay_scale);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoContact) throw;
    region = closest_pair_region(ps, cs);
    r.fallback_region = true;
  }
  r.contact_points = region.points.size();
  auto prepared = prepare_samples(cs, parent_sdf, config);
  auto candidates = generate_candidates(region, config);
  r.ranked = rank_and_refine(candidates, prepared, parent_sdf, region.centroid, config);
  JointFeatures f{parent.id, child.id, r.ranked.s_rev(), r.ranked.s_pri(), region.centroid, region.normal,
                  region.points.size()};
  JointType type = classify_joint(f.s_rev, f.s_pri, prior.query(f), config);
  r.spec = spec_from(type, r.ranked, child.centroid - parent.centroid);
  return r;
}

std::vector<JointType> majority_types(const KinematicTree& tree, const SymmetryClusters& clusters,
                                      std::span<const JointType> types) {
  std::vector<JointType> out(types.begin(), types.end());
  const auto& edges = tree.edges();
  for (const auto& cluster : clusters.clusters) {
    if (cluster.size() < 2) continue;
    std::vector<std::size_t> members;
    for (std::size_t e = 0; e < edges.size(); ++e)
      if (std::binary_search(cluster.begin(), cluster.end(), edges[e].child)) members.push_back(e);
    if (members.size() < 2) continue;
    std::map<JointType, int> count;
    for (std::size_t e : members) ++count[types[e]];
    int best = 0, ties = 0;
    JointType winner = JointType::Fixed;
    for (auto [t, n] : count) {
      if (n > best) {
        best = n;
        winner = t;
        ties = 1;
      } else if (n == best) {
        ++ties;
      }
    }
    if (ties != 1) continue;
    for (std::size_t e : members) out[e] = winner;
  }
  return out;
}

void harmonize_types(const KinematicTree& tree, const SymmetryClusters& clusters,
                     std::span<EdgeJointResult> results) {
  std::vector<JointType> types;
  for (const auto& r : results) types.push_back(r.spec.type);
  auto fixed = majority_types(tree, clusters, types);
  for (std::size_t e = 0; e < results.size(); ++e)
    if (fixed[e] != types[e]) results[e].spec = spec_from(fixed[e], results[e].ranked, results[e].spec.origin);
}

}  // namespace kintree
