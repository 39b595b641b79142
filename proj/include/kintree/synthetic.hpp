#pragma once

#include "kintree/assembly.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace kintree {

enum class Template { Chain, Star, MultiBranch, SymmetricLegs, Door, Drawer, Loop };

std::string_view to_string(Template t);
Template template_from_string(std::string_view s);

/// Procedural assembly with known joints. Geometry is laid out so the
/// assembly diagonal is close to 1.
struct SyntheticAssembly {
  Template kind = Template::Chain;
  std::vector<TriangleMesh> meshes;
  std::vector<std::string> names;
  GroundTruth truth;
  double diagonal = 0.0;
};

/// `parts` selects the link count for Chain (2..4) and the leg count for
/// SymmetricLegs (2 or 4); 0 takes the template default.
SyntheticAssembly generate_synthetic(Template t, std::uint64_t seed, int parts = 0);

/// Writes meshes/<name>.obj and manifest.json under `dir`; returns the manifest path.
std::filesystem::path write_synthetic(const SyntheticAssembly& a, const std::filesystem::path& dir);

/// Default fixture suite used by the ablation checks.
struct SuiteEntry {
  Template kind;
  std::uint64_t seed;
  int parts;
};
std::vector<SuiteEntry> default_fixture_suite();

}  // namespace kintree
