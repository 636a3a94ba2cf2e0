#ifndef SRN_SYNTH_HPP_
#define SRN_SYNTH_HPP_

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "srn/data.hpp"

namespace srn {

enum class GlyphShape { kDisk, kSquare, kTriangle, kBar };
GlyphShape parse_shape(const std::string& name);
std::string shape_name(GlyphShape s);

struct Glyph {
  GlyphShape shape = GlyphShape::kDisk;
  std::array<float, 3> color = {1.0f, 1.0f, 1.0f};
  int size_min = 4;
  int size_max = 6;
};

enum class Relation { kAbove, kBelow, kLeftOf, kRightOf, kNear };
Relation parse_relation(const std::string& name);
std::string relation_name(Relation r);

struct SpatialRule {
  int a = 0;  // subject
  int b = 0;  // object
  Relation rel = Relation::kAbove;
  double compliance = 1.0;
};

/// Generative recipe for the planted-relation benchmark: per-label glyphs,
/// marginals, pairwise co-occurrence probabilities, and spatial rules with
/// compliance probabilities.
struct WorldSpec {
  int num_labels = 0;
  int canvas = 32;
  int channels = 3;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::vector<Glyph> glyphs;
  std::vector<double> marginals;
  std::map<std::pair<int, int>, double> cooc;  // directed: P(second | first present)
  std::vector<SpatialRule> rules;

  void validate() const;
  std::string to_text() const;
  static WorldSpec parse_text(const std::string& text, const std::string& origin = "<world>");
  static WorldSpec parse_file(const std::string& path);
};

/// Label set, sizes, and centers of one sample before rendering. Centers are
/// (y, x) with y growing downward; absent labels hold (-1, -1).
struct SampleStructure {
  std::vector<std::uint8_t> present;
  std::vector<int> sizes;
  std::vector<std::array<float, 2>> centers;
  bool relaxed = false;  // placement cap hit; constraints only partially met
};

/// Deterministic given (world.seed, index).
SampleStructure sample_structure(const WorldSpec& world, std::uint64_t index);

/// Renders one structure to an anti-aliased image with additive Gaussian
/// pixel noise, clamped to [0, 1].
Tensorf render_sample(const WorldSpec& world, const SampleStructure& s, std::uint64_t index);

/// n samples split 70/10/20 (rounded; remainder to train).
Dataset generate(const WorldSpec& world, int n, std::vector<std::string>* warnings = nullptr);

/// Explicit split sizes.
Dataset generate(const WorldSpec& world, int n_train, int n_val, int n_test,
                 std::vector<std::string>* warnings = nullptr);

struct WorldReport {
  int probe_size = 0;
  std::vector<double> realized_marginals;
  std::vector<std::uint8_t> marginal_flagged;       // only labels without cooc parents
  std::vector<double> pair_joint;                   // C*C row-major, diagonal = marginal
  std::vector<std::uint8_t> pair_flagged;           // only when the cooc graph is empty
  std::vector<double> rule_realized;                // per rule; -1 when never co-present
  std::vector<int> rule_pairs;                      // co-present sample counts per rule
  std::vector<std::uint8_t> rule_flagged;
  std::vector<std::string> warnings;
  bool ok = true;
};

/// Empirical statistics over a probe draw; deviations beyond 3 standard
/// errors are flagged.
WorldReport validate_world(const WorldSpec& world, int probe_size = 5000);

std::string world_report_text(const WorldSpec& world, const WorldReport& report);
std::string world_report_json(const WorldSpec& world, const WorldReport& report);

}  // namespace srn

#endif  // SRN_SYNTH_HPP_
