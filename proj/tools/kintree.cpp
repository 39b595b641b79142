// kintree command line: build, eval, gen, inspect.

#include "kintree/pipeline.hpp"
#include "kintree/synthetic.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

using namespace kintree;
using nlohmann::json;

namespace {

constexpr int kExitInvalid = 2;
constexpr int kExitStage = 3;

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt_vec(const std::optional<Vec3>& v) {
  if (!v) return "-";
  std::ostringstream o;
  o << std::fixed << std::setprecision(4) << "(" << v->x() << ", " << v->y() << ", " << v->z() << ")";
  return o.str();
}

bool looks_like_xml(const std::filesystem::path& p, const std::string& text) {
  if (p.extension() == ".urdf" || p.extension() == ".xml") return true;
  auto i = text.find_first_not_of(" \t\r\n");
  return i != std::string::npos && text[i] == '<';
}

KinematicTree load_prediction(const std::filesystem::path& p, std::size_t parts) {
  std::string text = read_file(p);
  if (looks_like_xml(p, text)) return UrdfDocument::parse(text).to_tree();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, p.string() + ": " + e.what());
  }
  return tree_from_json(j, parts);
}

void print_tree(const json& j) {
  KinematicTree t = tree_from_json(j);
  std::cout << "tree: " << t.node_count() << " nodes, " << t.edges().size() << " edges, root " << t.root() << "\n";
  std::cout << std::left << std::setw(8) << "parent" << std::setw(8) << "child" << std::setw(11) << "type"
            << std::setw(30) << "axis" << std::setw(30) << "pivot"
            << "score\n";
  for (const auto& e : t.edges()) {
    std::ostringstream score;
    if (e.joint.type != JointType::Fixed) score << std::fixed << std::setprecision(4) << e.joint.score;
    std::cout << std::left << std::setw(8) << e.parent << std::setw(8) << e.child << std::setw(11)
              << (std::string(to_string(e.joint.type)) + (e.is_virtual ? "*" : "")) << std::setw(30)
              << fmt_vec(e.joint.axis) << std::setw(30) << fmt_vec(e.joint.pivot) << score.str() << "\n";
  }
  if (j.contains("reward_breakdown")) {
    std::cout << "reward:";
    for (const auto& [k, v] : j.at("reward_breakdown").items())
      std::cout << " " << k << "=" << std::fixed << std::setprecision(6) << v.get<double>();
    std::cout << "\n";
  }
}

void print_joints(const json& j) {
  std::cout << "joint diagnostics: " << j.size() << " edges\n";
  for (const auto& e : j) {
    const auto& c = e.at("chosen");
    std::cout << "  " << e.at("edge")[0].get<int>() << " -> " << e.at("edge")[1].get<int>() << "  "
              << c.at("type").get<std::string>() << "  s_rev=" << std::fixed << std::setprecision(4)
              << e.at("s_rev").get<double>() << " s_pri=" << e.at("s_pri").get<double>()
              << " candidates=" << e.at("candidates").size() << "\n";
  }
}

void print_graph(const json& j) {
  auto g = ConnectionGraph::from_json(j);
  std::cout << "contact graph: " << g.node_count() << " nodes, " << g.edges().size() << " edges\n";
  for (const auto& e : g.edges())
    std::cout << "  " << e.u << " -- " << e.v << "  distance=" << std::scientific << std::setprecision(3)
              << e.distance << " strength=" << std::fixed << std::setprecision(4) << e.strength
              << (e.is_virtual ? " virtual" : "") << "\n";
}

void inspect(const std::filesystem::path& p) {
  std::string text = read_file(p);
  if (looks_like_xml(p, text)) {
    auto doc = UrdfDocument::parse(text);
    std::cout << "robot " << doc.robot << ": " << doc.links.size() << " links, " << doc.joints.size() << " joints\n";
    for (const auto& jn : doc.joints)
      std::cout << "  " << jn.name << "  " << to_string(jn.type) << "  " << jn.parent << " -> " << jn.child
                << "  axis " << fmt_vec(jn.axis) << "\n";
    return;
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, p.string() + ": " + e.what());
  }
  try {
    if (j.is_object() && j.contains("root") && j.contains("edges")) return print_tree(j);
    if (j.is_array() && (j.empty() || (j[0].is_object() && j[0].contains("chosen")))) return print_joints(j);
    if (j.is_object() && j.contains("nodes") && j.contains("edges")) return print_graph(j);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, p.string() + ": " + e.what());
  }
  throw Error(ErrorCode::ParseError, p.string() + " is not a tree dump, joint dump, contact graph or URDF");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kintree: kinematic trees and joints from part meshes"};
  app.require_subcommand(1);

  std::filesystem::path manifest, config_path, out_dir, pred_path, artifact;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string topology, mesh_mode, template_name = "chain";
  std::vector<std::string> sets;
  bool no_anchor = false, suite = false;
  int parts = 0;
  std::uint64_t gen_seed = 1;

  auto* build = app.add_subcommand("build", "run the full pipeline on a manifest");
  build->add_option("manifest", manifest, "assembly manifest (JSON)")->required()->check(CLI::ExistingFile);
  build->add_option("--config", config_path, "pipeline config (JSON)")->check(CLI::ExistingFile);
  build->add_option("--seed", seed, "global seed");
  build->add_option("--topology", topology, "topology search mode")->check(CLI::IsMember({"mcts", "bfs"}));
  build->add_flag("--no-anchor", no_anchor, "drop the pivot anchor and distance weighting");
  build->add_option("--out", out_dir, "output directory");
  build->add_option("--threads", threads, "worker thread cap")->check(CLI::NonNegativeNumber);
  build->add_option("--mesh-mode", mesh_mode, "copy meshes or reference sources")
      ->check(CLI::IsMember({"copy", "reference"}));
  build->add_option("--set", sets, "override a config value, e.g. dwcavl.top_k=3");

  auto* eval = app.add_subcommand("eval", "compare a URDF or tree dump against manifest ground truth");
  eval->add_option("prediction", pred_path, "URDF or tree dump")->required()->check(CLI::ExistingFile);
  eval->add_option("manifest", manifest, "manifest with ground_truth")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", out_dir, "write metrics.json and metrics.csv here");

  auto* gen = app.add_subcommand("gen", "write synthetic fixtures");
  gen->add_option("--template", template_name, "chain, star, multi-branch, symmetric-legs, door, drawer, loop");
  gen->add_option("--seed", gen_seed, "fixture seed");
  gen->add_option("--parts", parts, "links (chain) or legs (symmetric-legs); 0 for the default");
  gen->add_flag("--suite", suite, "write the default 10-fixture suite");
  gen->add_option("--out", out_dir, "output directory")->required();

  auto* insp = app.add_subcommand("inspect", "summarize a tree dump, joint dump, contact graph or URDF");
  insp->add_option("artifact", artifact, "file to inspect")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalid;
  }

  try {
    if (*build) {
      PipelineConfig cfg = config_path.empty() ? PipelineConfig{} : PipelineConfig::load(config_path);
      for (const auto& s : sets) cfg.set(s);
      if (seed) cfg.seed = *seed;
      if (threads) cfg.threads = *threads;
      if (!topology.empty()) cfg.topology = topology == "bfs" ? TopologyMode::Bfs : TopologyMode::Mcts;
      if (no_anchor) cfg.anchor = false;
      if (!out_dir.empty()) cfg.output = out_dir;
      if (!mesh_mode.empty()) cfg.mesh_mode = mesh_mode_from_string(mesh_mode);
      cfg.resolve(1.0);
      auto r = run_pipeline(manifest, cfg);
      std::size_t movable = 0;
      for (const auto& e : r.tree.edges()) movable += e.joint.type != JointType::Fixed;
      std::cout << "parts: " << r.assembly.parts.size() << "  contact edges: " << r.graph.edges().size()
                << "  movable joints: " << movable << "\n";
      std::cout << "urdf: " << r.urdf.string() << "\ntree: " << r.tree_dump.string() << "\n";
      if (r.metrics)
        std::cout << "TED " << r.metrics->tree_edit_distance << "  mean axis angle error " << r.metrics->mean_angle
                  << " deg  mean axis position error " << r.metrics->mean_position << "\n";
    } else if (*eval) {
      auto m = load_manifest(manifest);
      if (!m.ground_truth) throw Error(ErrorCode::InvalidInput, "manifest has no ground_truth");
      auto assembly = load_assembly(m);
      auto pred = load_prediction(pred_path, assembly.parts.size());
      auto report = evaluate(pred, *m.ground_truth, assembly.parts.size(), assembly.diagonal());
      std::cout << report.to_json().dump(2) << "\n";
      if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        std::ofstream(out_dir / "metrics.json") << report.to_json().dump(2) << "\n";
        std::ofstream(out_dir / "metrics.csv") << report.to_csv(manifest.parent_path().filename().string());
      }
    } else if (*gen) {
      std::vector<SuiteEntry> entries;
      if (suite)
        entries = default_fixture_suite();
      else
        entries.push_back({template_from_string(template_name), gen_seed, parts});
      for (const auto& e : entries) {
        auto a = generate_synthetic(e.kind, e.seed, e.parts);
        auto dir = suite ? out_dir / (std::string(to_string(e.kind)) + "_" + std::to_string(e.seed) +
                                      (e.parts ? "_" + std::to_string(e.parts) : ""))
                         : out_dir;
        std::cout << write_synthetic(a, dir).string() << "\n";
      }
    } else if (*insp) {
      inspect(artifact);
    }
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.code()) {
      case ErrorCode::InvalidInput:
      case ErrorCode::ParseError:
      case ErrorCode::IoError: return kExitInvalid;
      default: return kExitStage;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStage;
  }
  return 0;
}
