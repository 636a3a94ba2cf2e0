#include "srn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <json.hpp>

#include "srn/kv.hpp"
#include "srn/rng.hpp"

namespace srn {

GlyphShape parse_shape(const std::string& name) {
  if (name == "disk") return GlyphShape::kDisk;
  if (name == "square") return GlyphShape::kSquare;
  if (name == "triangle") return GlyphShape::kTriangle;
  if (name == "bar") return GlyphShape::kBar;
  throw ConfigError("unknown glyph shape '" + name + "'");
}

std::string shape_name(GlyphShape s) {
  switch (s) {
    case GlyphShape::kDisk: return "disk";
    case GlyphShape::kSquare: return "square";
    case GlyphShape::kTriangle: return "triangle";
    case GlyphShape::kBar: return "bar";
  }
  return "?";
}

Relation parse_relation(const std::string& name) {
  if (name == "above") return Relation::kAbove;
  if (name == "below") return Relation::kBelow;
  if (name == "left-of") return Relation::kLeftOf;
  if (name == "right-of") return Relation::kRightOf;
  if (name == "near") return Relation::kNear;
  throw ConfigError("unknown relation '" + name + "'");
}

std::string relation_name(Relation r) {
  switch (r) {
    case Relation::kAbove: return "above";
    case Relation::kBelow: return "below";
    case Relation::kLeftOf: return "left-of";
    case Relation::kRightOf: return "right-of";
    case Relation::kNear: return "near";
  }
  return "?";
}

namespace {

bool relation_holds(Relation rel, const std::array<float, 2>& ca, const std::array<float, 2>& cb,
                    double near_radius) {
  switch (rel) {
    case Relation::kAbove: return ca[0] < cb[0];
    case Relation::kBelow: return ca[0] > cb[0];
    case Relation::kLeftOf: return ca[1] < cb[1];
    case Relation::kRightOf: return ca[1] > cb[1];
    case Relation::kNear: {
      const double dy = ca[0] - cb[0], dx = ca[1] - cb[1];
      return std::sqrt(dy * dy + dx * dx) < near_radius;
    }
  }
  return false;
}

/// Strict-order cycle detection among hard rules on one axis. above/below
/// order the y coordinates, left-of/right-of the x coordinates; a cycle
/// makes the conjunction unsatisfiable.
void check_hard_cycles(const WorldSpec& w) {
  for (int axis = 0; axis < 2; ++axis) {
    // edge u -> v: coordinate(u) must be strictly less than coordinate(v)
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(w.num_labels));
    bool any = false;
    for (const auto& r : w.rules) {
      if (r.compliance < 1.0) continue;
      int u = -1, v = -1;
      if (axis == 0 && r.rel == Relation::kAbove) u = r.a, v = r.b;
      if (axis == 0 && r.rel == Relation::kBelow) u = r.b, v = r.a;
      if (axis == 1 && r.rel == Relation::kLeftOf) u = r.a, v = r.b;
      if (axis == 1 && r.rel == Relation::kRightOf) u = r.b, v = r.a;
      if (u < 0) continue;
      adj[static_cast<std::size_t>(u)].push_back(v);
      any = true;
    }
    if (!any) continue;
    // 0 unvisited, 1 on stack, 2 done
    std::vector<int> state(static_cast<std::size_t>(w.num_labels), 0);
    std::vector<std::pair<int, std::size_t>> stack;
    for (int start = 0; start < w.num_labels; ++start) {
      if (state[static_cast<std::size_t>(start)] != 0) continue;
      stack.push_back({start, 0});
      state[static_cast<std::size_t>(start)] = 1;
      while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < adj[static_cast<std::size_t>(node)].size()) {
          const int child = adj[static_cast<std::size_t>(node)][next++];
          if (state[static_cast<std::size_t>(child)] == 1)
            throw ConfigError("world: hard spatial rules form a cycle through label " +
                              std::to_string(child));
          if (state[static_cast<std::size_t>(child)] == 0) {
            state[static_cast<std::size_t>(child)] = 1;
            stack.push_back({child, 0});
          }
        } else {
          state[static_cast<std::size_t>(node)] = 2;
          stack.pop_back();
        }
      }
    }
  }
}

}  // namespace

void WorldSpec::validate() const {
  if (num_labels < 1) throw ConfigError("world: labels must be >= 1");
  if (canvas < 8) throw ConfigError("world: canvas must be >= 8");
  if (channels != 1 && channels != 3) throw ConfigError("world: channels must be 1 or 3");
  if (noise < 0.0) throw ConfigError("world: negative noise");
  if (static_cast<int>(glyphs.size()) != num_labels)
    throw ConfigError("world: need one glyph per label (" + std::to_string(glyphs.size()) +
                      " of " + std::to_string(num_labels) + " given)");
  if (static_cast<int>(marginals.size()) != num_labels)
    throw ConfigError("world: need one marginal per label");
  for (double m : marginals)
    if (m < 0.0 || m > 1.0) throw ConfigError("world: marginal outside [0, 1]");
  for (const auto& g : glyphs) {
    if (g.size_min < 2 || g.size_max < g.size_min || g.size_max > canvas / 2)
      throw ConfigError("world: glyph size range must fit [2, canvas/2]");
    for (float ch : g.color)
      if (ch < 0.0f || ch > 1.0f) throw ConfigError("world: glyph color outside [0, 1]");
  }
  for (const auto& [key, p] : cooc) {
    const auto [a, b] = key;
    if (a < 0 || a >= num_labels || b < 0 || b >= num_labels || a == b)
      throw ConfigError("world: co-occurrence entry references bad label pair");
    if (p < 0.0 || p > 1.0) throw ConfigError("world: co-occurrence outside [0, 1]");
  }
  for (const auto& r : rules) {
    if (r.a < 0 || r.a >= num_labels || r.b < 0 || r.b >= num_labels)
      throw ConfigError("world: rule references unknown label");
    if (r.a == r.b) throw ConfigError("world: rule labels must be distinct");
    if (r.compliance < 0.0 || r.compliance > 1.0)
      throw ConfigError("world: compliance outside [0, 1]");
  }
  check_hard_cycles(*this);
}

std::string WorldSpec::to_text() const {
  std::ostringstream os;
  os << "labels = " << num_labels << "\ncanvas = " << canvas << "\nchannels = " << channels
     << "\nnoise = " << noise << "\nseed = " << seed << "\n";
  for (int l = 0; l < num_labels; ++l) {
    const auto& g = glyphs[static_cast<std::size_t>(l)];
    os << "glyph " << l << " " << shape_name(g.shape) << " " << g.color[0] << "," << g.color[1]
       << "," << g.color[2] << " " << g.size_min << " " << g.size_max << "\n";
  }
  for (int l = 0; l < num_labels; ++l)
    os << "marginal " << l << " = " << marginals[static_cast<std::size_t>(l)] << "\n";
  for (const auto& [key, p] : cooc)
    os << "cooc " << key.first << " " << key.second << " = " << p << "\n";
  for (const auto& r : rules)
    os << "rule " << r.a << " " << relation_name(r.rel) << " " << r.b << " = " << r.compliance
       << "\n";
  return os.str();
}

WorldSpec WorldSpec::parse_text(const std::string& text, const std::string& origin) {
  WorldSpec w;
  w.marginals.clear();
  std::map<int, Glyph> glyph_lines;
  std::map<int, double> marginal_lines;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& msg) -> ConfigError {
    return ConfigError(origin + ":" + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream ls(t);
    std::string head;
    ls >> head;
    if (head == "glyph") {
      int id;
      std::string shape, color;
      Glyph g;
      if (!(ls >> id >> shape >> color >> g.size_min >> g.size_max))
        throw fail("expected 'glyph <id> <shape> <r,g,b> <smin> <smax>'");
      g.shape = parse_shape(shape);
      const auto parts = split(color, ',');
      if (parts.size() != 3) throw fail("glyph color must be r,g,b");
      for (int i = 0; i < 3; ++i) g.color[static_cast<std::size_t>(i)] = std::stof(parts[static_cast<std::size_t>(i)]);
      if (glyph_lines.count(id)) throw fail("duplicate glyph for label " + std::to_string(id));
      glyph_lines[id] = g;
    } else if (head == "marginal") {
      int id;
      std::string eq;
      double p;
      if (!(ls >> id >> eq >> p) || eq != "=") throw fail("expected 'marginal <id> = <p>'");
      if (marginal_lines.count(id)) throw fail("duplicate marginal for label " + std::to_string(id));
      marginal_lines[id] = p;
    } else if (head == "cooc") {
      int a, b;
      std::string eq;
      double p;
      if (!(ls >> a >> b >> eq >> p) || eq != "=") throw fail("expected 'cooc <a> <b> = <p>'");
      if (w.cooc.count({a, b})) throw fail("duplicate cooc entry");
      w.cooc[{a, b}] = p;
    } else if (head == "rule") {
      SpatialRule r;
      std::string rel, eq;
      if (!(ls >> r.a >> rel >> r.b >> eq >> r.compliance) || eq != "=")
        throw fail("expected 'rule <a> <relation> <b> = <compliance>'");
      r.rel = parse_relation(rel);
      w.rules.push_back(r);
    } else {
      // plain key = value scalars
      std::istringstream kv(t);
      std::string key, eq, value;
      if (!(kv >> key >> eq >> value) || eq != "=") throw fail("unrecognized line");
      try {
        if (key == "labels") w.num_labels = std::stoi(value);
        else if (key == "canvas") w.canvas = std::stoi(value);
        else if (key == "channels") w.channels = std::stoi(value);
        else if (key == "noise") w.noise = std::stod(value);
        else if (key == "seed") w.seed = std::stoull(value);
        else throw fail("unknown key '" + key + "'");
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception&) {
        throw fail("bad value for '" + key + "'");
      }
    }
  }
  if (w.num_labels < 1) throw ConfigError(origin + ": missing 'labels' line");
  w.glyphs.resize(static_cast<std::size_t>(w.num_labels));
  w.marginals.assign(static_cast<std::size_t>(w.num_labels), 0.0);
  for (int l = 0; l < w.num_labels; ++l) {
    auto it = glyph_lines.find(l);
    if (it == glyph_lines.end())
      throw ConfigError(origin + ": no glyph line for label " + std::to_string(l));
    w.glyphs[static_cast<std::size_t>(l)] = it->second;
    auto mit = marginal_lines.find(l);
    if (mit == marginal_lines.end())
      throw ConfigError(origin + ": no marginal line for label " + std::to_string(l));
    w.marginals[static_cast<std::size_t>(l)] = mit->second;
  }
  if (static_cast<int>(glyph_lines.size()) != w.num_labels)
    throw ConfigError(origin + ": glyph line for out-of-range label");
  if (static_cast<int>(marginal_lines.size()) != w.num_labels)
    throw ConfigError(origin + ": marginal line for out-of-range label");
  w.validate();
  return w;
}

WorldSpec WorldSpec::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open world file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str(), path);
}

SampleStructure sample_structure(const WorldSpec& world, std::uint64_t index) {
  std::mt19937_64 rng(derive_seed(world.seed, index));
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const int c = world.num_labels;

  SampleStructure s;
  s.present.assign(static_cast<std::size_t>(c), 0);
  s.sizes.assign(static_cast<std::size_t>(c), 0);
  s.centers.assign(static_cast<std::size_t>(c), {-1.0f, -1.0f});

  // Labels in index order: the probability of label l is its marginal unless
  // co-occurrence parents (lower-index labels with a cooc entry toward l) are
  // already present, in which case it is the mean of their entries.
  for (int l = 0; l < c; ++l) {
    double p = world.marginals[static_cast<std::size_t>(l)];
    double sum = 0.0;
    int cnt = 0;
    for (int parent = 0; parent < l; ++parent) {
      if (!s.present[static_cast<std::size_t>(parent)]) continue;
      auto it = world.cooc.find({parent, l});
      if (it == world.cooc.end()) continue;
      sum += it->second;
      ++cnt;
    }
    if (cnt > 0) p = sum / cnt;
    s.present[static_cast<std::size_t>(l)] = uni(rng) < p ? 1 : 0;
  }

  for (int l = 0; l < c; ++l) {
    if (!s.present[static_cast<std::size_t>(l)]) continue;
    const auto& g = world.glyphs[static_cast<std::size_t>(l)];
    std::uniform_int_distribution<int> size_pick(g.size_min, g.size_max);
    s.sizes[static_cast<std::size_t>(l)] = size_pick(rng);
  }

  // Decide every applicable rule up front: with probability `compliance` the
  // relation must hold, otherwise its negation must. Then draw all centers
  // jointly by rejection so the conditional placement stays uniform.
  struct Decided {
    const SpatialRule* rule;
    bool enforce;
  };
  std::vector<Decided> decided;
  for (const auto& r : world.rules) {
    if (!s.present[static_cast<std::size_t>(r.a)] || !s.present[static_cast<std::size_t>(r.b)])
      continue;
    decided.push_back({&r, uni(rng) < r.compliance});
  }

  const double near_radius = world.canvas / 4.0;
  constexpr int kMaxAttempts = 100;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    for (int l = 0; l < c; ++l) {
      if (!s.present[static_cast<std::size_t>(l)]) continue;
      const double half = s.sizes[static_cast<std::size_t>(l)] / 2.0;
      std::uniform_real_distribution<double> pos(half, world.canvas - half);
      s.centers[static_cast<std::size_t>(l)] = {static_cast<float>(pos(rng)),
                                                static_cast<float>(pos(rng))};
    }
    bool all_ok = true;
    for (const auto& d : decided) {
      const bool holds = relation_holds(d.rule->rel, s.centers[static_cast<std::size_t>(d.rule->a)],
                                        s.centers[static_cast<std::size_t>(d.rule->b)], near_radius);
      if (holds != d.enforce) {
        all_ok = false;
        break;
      }
    }
    if (all_ok) return s;
  }
  s.relaxed = true;  // keep the last draw
  return s;
}

namespace {

/// Coverage of pixel (y, x) by the glyph, via a 4x4 subsample grid.
double glyph_coverage(const Glyph& g, double cy, double cx, int size, int y, int x) {
  const double half = size / 2.0;
  int hit = 0;
  for (int sy = 0; sy < 4; ++sy) {
    for (int sx = 0; sx < 4; ++sx) {
      const double py = y + (sy + 0.5) / 4.0;
      const double px = x + (sx + 0.5) / 4.0;
      const double dy = py - cy, dx = px - cx;
      bool inside = false;
      switch (g.shape) {
        case GlyphShape::kDisk:
          inside = dy * dy + dx * dx <= half * half;
          break;
        case GlyphShape::kSquare:
          inside = std::abs(dy) <= half && std::abs(dx) <= half;
          break;
        case GlyphShape::kTriangle: {
          // upward triangle inscribed in the glyph square
          if (dy < -half || dy > half) break;
          const double frac = (dy + half) / size;  // 0 at apex, 1 at base
          inside = std::abs(dx) <= frac * half;
          break;
        }
        case GlyphShape::kBar: {
          const double bar_half = std::max(size / 6.0, 0.75);
          inside = std::abs(dy) <= bar_half && std::abs(dx) <= half;
          break;
        }
      }
      hit += inside;
    }
  }
  return hit / 16.0;
}

}  // namespace

Tensorf render_sample(const WorldSpec& world, const SampleStructure& s, std::uint64_t index) {
  Tensorf img({world.canvas, world.canvas, world.channels});
  for (int l = 0; l < world.num_labels; ++l) {
    if (!s.present[static_cast<std::size_t>(l)]) continue;
    const auto& g = world.glyphs[static_cast<std::size_t>(l)];
    const double cy = s.centers[static_cast<std::size_t>(l)][0];
    const double cx = s.centers[static_cast<std::size_t>(l)][1];
    const int size = s.sizes[static_cast<std::size_t>(l)];
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - size)));
    const int y1 = std::min(world.canvas - 1, static_cast<int>(std::ceil(cy + size)));
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - size)));
    const int x1 = std::min(world.canvas - 1, static_cast<int>(std::ceil(cx + size)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double alpha = glyph_coverage(g, cy, cx, size, y, x);
        if (alpha <= 0.0) continue;
        for (int ch = 0; ch < world.channels; ++ch) {
          const double color = world.channels == 3
                                   ? g.color[static_cast<std::size_t>(ch)]
                                   : (g.color[0] + g.color[1] + g.color[2]) / 3.0;
          float& px = img(y, x, ch);
          px = static_cast<float>(px * (1.0 - alpha) + color * alpha);
        }
      }
    }
  }
  if (world.noise > 0.0) {
    // separate stream so structure sampling stays noise-independent
    std::mt19937_64 rng(derive_seed(world.seed ^ 0x6e6f697365ULL, index));
    std::normal_distribution<double> gauss(0.0, world.noise);
    for (int i = 0; i < img.size(); ++i)
      img[i] = static_cast<float>(std::clamp(static_cast<double>(img[i]) + gauss(rng), 0.0, 1.0));
  }
  return img;
}

Dataset generate(const WorldSpec& world, int n_train, int n_val, int n_test,
                 std::vector<std::string>* warnings) {
  world.validate();
  const int n = n_train + n_val + n_test;
  if (n < 1) throw ConfigError("generate: need at least one sample");
  if (n_train < 0 || n_val < 0 || n_test < 0) throw ConfigError("generate: negative split size");
  Dataset d;
  d.height = d.width = world.canvas;
  d.channels = world.channels;
  d.num_labels = world.num_labels;
  d.n_train = n_train;
  d.n_val = n_val;
  d.n_test = n_test;
  d.samples.resize(static_cast<std::size_t>(n));
  int relaxed = 0;
  for (int i = 0; i < n; ++i) {
    const SampleStructure s = sample_structure(world, static_cast<std::uint64_t>(i));
    relaxed += s.relaxed;
    Sample& out = d.samples[static_cast<std::size_t>(i)];
    out.image = render_sample(world, s, static_cast<std::uint64_t>(i));
    out.targets = s.present;
    out.centers = s.centers;
  }
  if (relaxed > 0 && warnings)
    warnings->push_back("placement cap hit on " + std::to_string(relaxed) + " of " +
                        std::to_string(n) + " samples; their spatial constraints were relaxed");
  d.validate();
  return d;
}

Dataset generate(const WorldSpec& world, int n, std::vector<std::string>* warnings) {
  if (n < 1) throw ConfigError("generate: need at least one sample");
  const int n_val = static_cast<int>(std::lround(n * 0.1));
  const int n_test = static_cast<int>(std::lround(n * 0.2));
  return generate(world, n - n_val - n_test, n_val, n_test, warnings);
}

WorldReport validate_world(const WorldSpec& world, int probe_size) {
  world.validate();
  if (probe_size < 1) throw ConfigError("validate_world: probe size must be >= 1");
  const int c = world.num_labels;
  WorldReport rep;
  rep.probe_size = probe_size;
  rep.realized_marginals.assign(static_cast<std::size_t>(c), 0.0);
  rep.marginal_flagged.assign(static_cast<std::size_t>(c), 0);
  rep.pair_joint.assign(static_cast<std::size_t>(c) * c, 0.0);
  rep.pair_flagged.assign(static_cast<std::size_t>(c) * c, 0);
  rep.rule_realized.assign(world.rules.size(), -1.0);
  rep.rule_pairs.assign(world.rules.size(), 0);
  rep.rule_flagged.assign(world.rules.size(), 0);

  std::vector<int> rule_holds(world.rules.size(), 0);
  const double near_radius = world.canvas / 4.0;
  int relaxed = 0;
  for (int i = 0; i < probe_size; ++i) {
    const SampleStructure s = sample_structure(world, static_cast<std::uint64_t>(i));
    relaxed += s.relaxed;
    for (int a = 0; a < c; ++a) {
      if (!s.present[static_cast<std::size_t>(a)]) continue;
      rep.realized_marginals[static_cast<std::size_t>(a)] += 1.0;
      for (int b = 0; b < c; ++b)
        if (s.present[static_cast<std::size_t>(b)])
          rep.pair_joint[static_cast<std::size_t>(a) * c + b] += 1.0;
    }
    for (std::size_t r = 0; r < world.rules.size(); ++r) {
      const auto& rule = world.rules[r];
      if (!s.present[static_cast<std::size_t>(rule.a)] ||
          !s.present[static_cast<std::size_t>(rule.b)])
        continue;
      ++rep.rule_pairs[r];
      rule_holds[r] += relation_holds(rule.rel, s.centers[static_cast<std::size_t>(rule.a)],
                                      s.centers[static_cast<std::size_t>(rule.b)], near_radius);
    }
  }
  for (double& v : rep.realized_marginals) v /= probe_size;
  for (double& v : rep.pair_joint) v /= probe_size;
  if (relaxed > 0)
    rep.warnings.push_back("placement cap hit on " + std::to_string(relaxed) + " probe samples");

  auto se = [&](double p, double n) { return std::sqrt(std::max(p * (1.0 - p), 1e-12) / n); };

  // Marginal checks apply only to labels whose draw probability is always the
  // configured marginal (no incoming co-occurrence edge from a lower label).
  for (int l = 0; l < c; ++l) {
    bool has_parent = false;
    for (int parent = 0; parent < l && !has_parent; ++parent)
      has_parent = world.cooc.count({parent, l}) != 0;
    if (has_parent) continue;
    const double expect = world.marginals[static_cast<std::size_t>(l)];
    const double got = rep.realized_marginals[static_cast<std::size_t>(l)];
    if (std::abs(got - expect) > 3.0 * se(expect, probe_size)) {
      rep.marginal_flagged[static_cast<std::size_t>(l)] = 1;
      rep.ok = false;
    }
  }

  // With no co-occurrence graph at all, labels are independent and the joint
  // of every pair should be the product of marginals.
  if (world.cooc.empty()) {
    for (int a = 0; a < c; ++a) {
      for (int b = a + 1; b < c; ++b) {
        const double expect = world.marginals[static_cast<std::size_t>(a)] *
                              world.marginals[static_cast<std::size_t>(b)];
        const double got = rep.pair_joint[static_cast<std::size_t>(a) * c + b];
        if (std::abs(got - expect) > 3.0 * se(expect, probe_size)) {
          rep.pair_flagged[static_cast<std::size_t>(a) * c + b] = 1;
          rep.pair_flagged[static_cast<std::size_t>(b) * c + a] = 1;
          rep.ok = false;
        }
      }
    }
  }

  for (std::size_t r = 0; r < world.rules.size(); ++r) {
    if (rep.rule_pairs[r] == 0) continue;
    const double got = static_cast<double>(rule_holds[r]) / rep.rule_pairs[r];
    rep.rule_realized[r] = got;
    const double expect = world.rules[r].compliance;
    if (std::abs(got - expect) > 3.0 * se(expect, rep.rule_pairs[r])) {
      rep.rule_flagged[r] = 1;
      rep.ok = false;
    }
  }
  return rep;
}

std::string world_report_text(const WorldSpec& world, const WorldReport& rep) {
  std::ostringstream os;
  os << "probe size " << rep.probe_size << "\n\nlabel  marginal  realized  flag\n";
  for (int l = 0; l < world.num_labels; ++l) {
    os << l << "  " << world.marginals[static_cast<std::size_t>(l)] << "  "
       << rep.realized_marginals[static_cast<std::size_t>(l)] << "  "
       << (rep.marginal_flagged[static_cast<std::size_t>(l)] ? "DEVIATES" : "ok") << "\n";
  }
  os << "\nrule  spec  realized  pairs  flag\n";
  for (std::size_t r = 0; r < world.rules.size(); ++r) {
    const auto& rule = world.rules[r];
    os << rule.a << " " << relation_name(rule.rel) << " " << rule.b << "  " << rule.compliance
       << "  " << rep.rule_realized[r] << "  " << rep.rule_pairs[r] << "  "
       << (rep.rule_flagged[r] ? "DEVIATES" : "ok") << "\n";
  }
  for (const auto& w : rep.warnings) os << "warning: " << w << "\n";
  os << (rep.ok ? "OK\n" : "DEVIATIONS FLAGGED\n");
  return os.str();
}

std::string world_report_json(const WorldSpec& world, const WorldReport& rep) {
  nlohmann::json j;
  j["probe_size"] = rep.probe_size;
  j["ok"] = rep.ok;
  j["realized_marginals"] = rep.realized_marginals;
  j["marginal_flagged"] = rep.marginal_flagged;
  j["pair_joint"] = rep.pair_joint;
  nlohmann::json rules = nlohmann::json::array();
  for (std::size_t r = 0; r < world.rules.size(); ++r) {
    const auto& rule = world.rules[r];
    rules.push_back({{"a", rule.a},
                     {"relation", relation_name(rule.rel)},
                     {"b", rule.b},
                     {"compliance", rule.compliance},
                     {"realized", rep.rule_realized[r]},
                     {"pairs", rep.rule_pairs[r]},
                     {"flagged", static_cast<bool>(rep.rule_flagged[r])}});
  }
  j["rules"] = rules;
  j["warnings"] = rep.warnings;
  return j.dump(2) + "\n";
}

}  // namespace srn
