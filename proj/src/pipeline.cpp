#include "kintree/pipeline.hpp"

#include "kintree/error.hpp"

#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace kintree {

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Ingest: return "Ingest";
    case Stage::Sdf: return "Sdf";
    case Stage::Contact: return "Contact";
    case Stage::Topology: return "Topology";
    case Stage::Joints: return "Joints";
    case Stage::Export: return "Export";
  }
  return "Unknown";
}

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& where, const std::string& msg) {
  throw Error(ErrorCode::InvalidInput, "config " + where + ": " + msg);
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) bad(where, "must be an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) bad(where, "unknown key '" + k + "'");
}

void read(const json& j, const char* key, double& out, const std::string& where) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_number()) bad(where + "." + key, "expected a number");
  out = v.get<double>();
}

void read(const json& j, const char* key, int& out, const std::string& where) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_number_integer()) bad(where + "." + key, "expected an integer");
  out = v.get<int>();
}

void read(const json& j, const char* key, std::size_t& out, const std::string& where) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) bad(where + "." + key, "expected a non-negative integer");
  out = v.get<std::size_t>();
}

void read_seed(const json& j, const char* key, std::uint64_t& out, const std::string& where) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
    bad(where + "." + key, "expected a non-negative integer");
  out = v.get<std::uint64_t>();
}

void read(const json& j, const char* key, bool& out, const std::string& where) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_boolean()) bad(where + "." + key, "expected a boolean");
  out = v.get<bool>();
}

void read(const json& j, const char* key, std::vector<double>& out, const std::string& where) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_array()) bad(where + "." + key, "expected an array of numbers");
  out.clear();
  for (const auto& x : v) {
    if (!x.is_number()) bad(where + "." + key, "expected an array of numbers");
    out.push_back(x.get<double>());
  }
}

const json& section(const json& overrides, const char* name) {
  static const json empty = json::object();
  return overrides.contains(name) ? overrides.at(name) : empty;
}

void apply_contact(const json& j, ContactConfig& c) {
  reject_unknown(j, {"epsilon", "samples_per_part", "d_max", "seed"}, "contact");
  read(j, "epsilon", c.epsilon, "contact");
  read(j, "samples_per_part", c.samples_per_part, "contact");
  read(j, "d_max", c.d_max, "contact");
  read_seed(j, "seed", c.seed, "contact");
}

void apply_reward(const json& j, RewardConfig& c) {
  reject_unknown(j, {"weights", "preferred_out_degree", "edge_penalty", "density", "gravity", "epsilon_sym",
                     "epsilon_hier"},
                 "reward");
  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    reject_unknown(w, {"structure", "statics", "contact", "symmetry", "hierarchy"}, "reward.weights");
    read(w, "structure", c.weights.structure, "reward.weights");
    read(w, "statics", c.weights.statics, "reward.weights");
    read(w, "contact", c.weights.contact, "reward.weights");
    read(w, "symmetry", c.weights.symmetry, "reward.weights");
    read(w, "hierarchy", c.weights.hierarchy, "reward.weights");
  }
  read(j, "preferred_out_degree", c.preferred_out_degree, "reward");
  read(j, "edge_penalty", c.edge_penalty, "reward");
  read(j, "density", c.density, "reward");
  read(j, "gravity", c.gravity, "reward");
  read(j, "epsilon_sym", c.epsilon_sym, "reward");
  read(j, "epsilon_hier", c.epsilon_hier, "reward");
}

void apply_search(const json& j, SearchConfig& c) {
  reject_unknown(j, {"exploration", "max_iterations", "seed", "d_max"}, "search");
  read(j, "exploration", c.exploration, "search");
  read(j, "max_iterations", c.max_iterations, "search");
  read_seed(j, "seed", c.seed, "search");
  read(j, "d_max", c.d_max, "search");
}

void apply_dwcavl(const json& j, DwCavlConfig& c) {
  reject_unknown(j, {"m_vol",          "k_sharp",       "sigma_c",      "eps_small",       "lambda_c",
                     "lambda_coll",    "lambda_p",      "length_scale", "revolute_motions", "prismatic_motions",
                     "n_random_axes",  "n_slide",       "slide_step",   "top_k",           "zeta",
                     "s_min",          "p_conf",        "tau_c",        "decay_scale",     "samples_per_part",
                     "coarse_samples", "iterations",    "axis_step",    "pivot_step",      "seed"},
                 "dwcavl");
  const std::string w = "dwcavl";
  read(j, "m_vol", c.m_vol, w);
  read(j, "k_sharp", c.k_sharp, w);
  read(j, "sigma_c", c.sigma_c, w);
  read(j, "eps_small", c.eps_small, w);
  read(j, "lambda_c", c.lambda_c, w);
  read(j, "lambda_coll", c.lambda_coll, w);
  read(j, "lambda_p", c.lambda_p, w);
  read(j, "length_scale", c.length_scale, w);
  read(j, "revolute_motions", c.revolute_motions, w);
  read(j, "prismatic_motions", c.prismatic_motions, w);
  read(j, "n_random_axes", c.n_random_axes, w);
  read(j, "n_slide", c.n_slide, w);
  read(j, "slide_step", c.slide_step, w);
  read(j, "top_k", c.top_k, w);
  read(j, "zeta", c.zeta, w);
  read(j, "s_min", c.s_min, w);
  read(j, "p_conf", c.p_conf, w);
  read(j, "tau_c", c.tau_c, w);
  read(j, "decay_scale", c.decay_scale, w);
  read(j, "samples_per_part", c.samples_per_part, w);
  read(j, "coarse_samples", c.coarse_samples, w);
  read(j, "iterations", c.iterations, w);
  read(j, "axis_step", c.axis_step, w);
  read(j, "pivot_step", c.pivot_step, w);
  read_seed(j, "seed", c.seed, w);
}

void apply_sdf(const json& j, SdfOptions& c) {
  reject_unknown(j, {"resolution", "padding", "min_cells_per_axis"}, "sdf");
  read(j, "resolution", c.resolution, "sdf");
  read(j, "padding", c.padding_rel, "sdf");
  read(j, "min_cells_per_axis", c.min_cells_per_axis, "sdf");
  if (c.resolution < 2 || c.min_cells_per_axis < 2) bad("sdf", "resolution must be >= 2");
  if (!(c.padding_rel >= 0)) bad("sdf", "padding must be >= 0");
}

void apply_symmetry(const json& j, ResolvedConfig& r) {
  reject_unknown(j, {"threshold", "samples", "seed"}, "symmetry");
  read(j, "threshold", r.symmetry_threshold, "symmetry");
  read(j, "samples", r.symmetry.samples, "symmetry");
  read_seed(j, "seed", r.symmetry.seed, "symmetry");
  if (!(r.symmetry_threshold >= 0)) bad("symmetry", "threshold must be >= 0");
  if (r.symmetry.samples == 0) bad("symmetry", "samples must be > 0");
}

void apply_validation(const json& j, ValidationLimits& v) {
  reject_unknown(j, {"min_vertices", "min_spread"}, "validation");
  read(j, "min_vertices", v.min_vertices, "validation");
  read(j, "min_spread", v.min_spread, "validation");
}

const std::initializer_list<const char*> kSections = {"sdf",      "contact",  "reward",    "search",
                                                      "symmetry", "dwcavl",   "validation"};

/// Runs fn(i) for i in [0, n) on up to `threads` workers; rethrows the
/// exception of the lowest failing index.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(threads, 1)));
  std::vector<std::exception_ptr> errors(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

template <class Fn>
auto staged(Stage s, Fn fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(s, e);
  } catch (const std::exception& e) {
    throw StageError(s, Error(ErrorCode::InvalidInput, e.what()));
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t mesh_key(const TriangleMesh& m, const SdfOptions& o) {
  std::uint64_t h = fnv1a(m.vertices.data(), m.vertices.size() * sizeof(Vec3));
  h = fnv1a(m.faces.data(), m.faces.size() * sizeof(m.faces[0]), h);
  h = fnv1a(&o.resolution, sizeof o.resolution, h);
  h = fnv1a(&o.padding_rel, sizeof o.padding_rel, h);
  return fnv1a(&o.min_cells_per_axis, sizeof o.min_cells_per_axis, h);
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& j) {
  reject_unknown(j, {"seed", "threads", "topology", "anchor", "output", "mesh_mode", "robot_name", "sdf_cache", "sdf",
                     "contact", "reward", "search", "symmetry", "dwcavl", "validation"},
                 "root");
  PipelineConfig c;
  read_seed(j, "seed", c.seed, "root");
  read(j, "threads", c.threads, "root");
  if (c.threads < 0) bad("threads", "must be >= 0");
  read(j, "anchor", c.anchor, "root");
  auto str = [&](const char* key) -> std::optional<std::string> {
    if (!j.contains(key)) return std::nullopt;
    if (!j.at(key).is_string()) bad(key, "expected a string");
    return j.at(key).get<std::string>();
  };
  if (auto t = str("topology")) {
    if (*t == "mcts")
      c.topology = TopologyMode::Mcts;
    else if (*t == "bfs")
      c.topology = TopologyMode::Bfs;
    else
      bad("topology", "must be mcts or bfs");
  }
  if (auto o = str("output")) c.output = *o;
  if (auto m = str("mesh_mode")) c.mesh_mode = mesh_mode_from_string(*m);
  if (auto r = str("robot_name")) {
    if (r->empty()) bad("robot_name", "must not be empty");
    c.robot_name = *r;
  }
  if (auto s = str("sdf_cache")) c.sdf_cache = *s;
  for (const char* s : kSections)
    if (j.contains(s)) c.overrides[s] = j.at(s);
  c.resolve(1.0);  // surfaces unknown keys and invalid values now
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidInput, "config is not valid JSON: " + std::string(e.what()));
  }
  return from_json(j);
}

void PipelineConfig::set(const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) bad("--set", "expected key=value, got '" + assignment + "'");
  std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json j = to_json();
  json* node = &j;
  std::size_t start = 0;
  for (std::size_t dot; (dot = key.find('.', start)) != std::string::npos; start = dot + 1) {
    node = &(*node)[key.substr(start, dot - start)];
    if (!node->is_object()) *node = json::object();
  }
  (*node)[key.substr(start)] = value;
  *this = from_json(j);
}

json PipelineConfig::to_json() const {
  json j = overrides;
  j["seed"] = seed;
  j["threads"] = threads;
  j["topology"] = topology == TopologyMode::Mcts ? "mcts" : "bfs";
  j["anchor"] = anchor;
  j["output"] = output.generic_string();
  j["mesh_mode"] = std::string(kintree::to_string(mesh_mode));
  j["robot_name"] = robot_name;
  if (sdf_cache) j["sdf_cache"] = sdf_cache->generic_string();
  return j;
}

ResolvedConfig PipelineConfig::resolve(double diagonal) const {
  if (!(diagonal > 0)) throw Error(ErrorCode::InvalidInput, "assembly diagonal must be > 0");
  ResolvedConfig r;
  apply_sdf(section(overrides, "sdf"), r.sdf);
  r.contact = ContactConfig::for_diagonal(diagonal);
  r.contact.seed = seed + 11;
  apply_contact(section(overrides, "contact"), r.contact);
  r.contact.validate();
  apply_reward(section(overrides, "reward"), r.reward);
  r.reward.validate();
  r.search.seed = seed;
  r.search.d_max = 0.25 * diagonal;
  apply_search(section(overrides, "search"), r.search);
  r.search.validate();
  r.dwcavl = DwCavlConfig::for_diagonal(diagonal, r.contact.epsilon);
  r.dwcavl.seed = seed + 23;
  r.dwcavl.anchor = anchor;
  apply_dwcavl(section(overrides, "dwcavl"), r.dwcavl);
  r.dwcavl.validate();
  r.symmetry.seed = seed + 0x5eed;
  r.symmetry_threshold = std::pow(0.01 * diagonal, 2);
  apply_symmetry(section(overrides, "symmetry"), r);
  apply_validation(section(overrides, "validation"), r.validation);
  return r;
}

int PipelineConfig::thread_count() const {
  if (threads > 0) return threads;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

PipelineResult run_pipeline(const std::filesystem::path& manifest_path, const PipelineConfig& config,
                            const JointTypePrior& prior) {
  PipelineResult out;
  const int threads = config.thread_count();
  std::optional<GroundTruth> truth;

  ResolvedConfig rc = config.resolve(1.0);
  out.assembly = staged(Stage::Ingest, [&] {
    auto manifest = load_manifest(manifest_path);
    truth = manifest.ground_truth;
    return load_assembly(manifest, rc.validation);
  });
  const auto& parts = out.assembly.parts;
  const double diag = out.assembly.diagonal();
  rc = staged(Stage::Ingest, [&] { return config.resolve(diag); });

  std::vector<SdfField> sdfs(parts.size());
  staged(Stage::Sdf, [&] {
    if (config.sdf_cache) {
      std::error_code ec;
      std::filesystem::create_directories(*config.sdf_cache, ec);
      if (ec) throw Error(ErrorCode::IoError, "cannot create " + config.sdf_cache->string());
    }
    parallel_for(parts.size(), threads, [&](std::size_t i) {
      if (!config.sdf_cache) {
        sdfs[i] = build_sdf(parts[i].mesh, rc.sdf);
        return;
      }
      std::ostringstream name;
      name << std::hex << mesh_key(parts[i].mesh, rc.sdf) << ".sdf";
      auto path = *config.sdf_cache / name.str();
      if (std::filesystem::exists(path)) {
        try {
          sdfs[i] = load_sdf_cache(path);
          return;
        } catch (const Error&) {
          // Stale or corrupt cache entries are rebuilt.
        }
      }
      sdfs[i] = build_sdf(parts[i].mesh, rc.sdf);
      save_sdf_cache(sdfs[i], path);
    });
  });

  out.graph = staged(Stage::Contact, [&] { return build_connection_graph(parts, sdfs, rc.contact); });

  const auto nodes = node_infos(parts);
  SymmetryClusters clusters;
  ConnectionGraph connected;
  staged(Stage::Topology, [&] {
    clusters = cluster_symmetric_parts(parts, rc.symmetry_threshold, rc.symmetry);
    const PartId base = select_base(out.graph);
    connected = attach_components(out.graph, base, nodes, rc.search.d_max);
    auto bfs = bfs_orient(out.graph, base, nodes, rc.search.d_max);
    if (config.topology == TopologyMode::Bfs) {
      out.tree = bfs.tree;
      out.reward = reward(out.tree, connected, nodes, clusters, rc.reward);
    } else {
      auto result = mcts_search(connected, base, nodes, clusters, rc.reward, rc.search, &bfs.tree);
      out.tree = result.tree;
      out.reward = result.reward;
    }
  });

  staged(Stage::Joints, [&] {
    const auto& edges = out.tree.edges();
    out.joints.resize(edges.size());
    parallel_for(edges.size(), threads, [&](std::size_t e) {
      const auto& edge = edges[e];
      if (edge.is_virtual) {
        EdgeJointResult r;
        r.parent = edge.parent;
        r.child = edge.child;
        r.spec.type = JointType::Fixed;
        r.spec.origin = parts[edge.child].centroid - parts[edge.parent].centroid;
        out.joints[e] = std::move(r);
        return;
      }
      out.joints[e] = estimate_joint(parts[edge.parent], sdfs[edge.parent], parts[edge.child], rc.dwcavl, prior);
    });
    harmonize_types(out.tree, clusters, out.joints);
    for (std::size_t e = 0; e < edges.size(); ++e) out.tree.edges()[e].joint = out.joints[e].spec;
  });

  staged(Stage::Export, [&] {
    const auto& dir = config.output;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string());
    out.graph_dump = dir / "contact_graph.json";
    write_text(out.graph_dump, out.graph.to_json().dump(2) + "\n");
    out.tree_dump = dir / "tree.json";
    write_text(out.tree_dump, tree_to_json(out.tree, &out.reward).dump(2) + "\n");
    json joints = json::array();
    for (const auto& r : out.joints) joints.push_back(r.diagnostics());
    out.joints_dump = dir / "joints.json";
    write_text(out.joints_dump, joints.dump(2) + "\n");
    UrdfOptions uo;
    uo.robot_name = config.robot_name;
    uo.density = rc.reward.density;
    uo.diagonal = diag;
    uo.mesh_mode = config.mesh_mode;
    out.urdf = write_urdf(out.tree, parts, dir, uo);
    if (truth) {
      out.metrics = evaluate(out.tree, *truth, parts.size(), diag);
      write_text(dir / "metrics.json", out.metrics->to_json().dump(2) + "\n");
      write_text(dir / "metrics.csv", out.metrics->to_csv(manifest_path.parent_path().filename().string()));
    }
  });
  return out;
}

}  // namespace kintree
