#include <doctest.h>

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "srn/synth.hpp"
#include "test_util.hpp"

using namespace srn;

namespace {

WorldSpec make_world(int labels, int canvas = 16, int channels = 1) {
  WorldSpec w;
  w.num_labels = labels;
  w.canvas = canvas;
  w.channels = channels;
  w.noise = 0.0;
  w.seed = 7;
  const GlyphShape shapes[] = {GlyphShape::kDisk, GlyphShape::kSquare, GlyphShape::kTriangle,
                               GlyphShape::kBar};
  for (int l = 0; l < labels; ++l) {
    Glyph g;
    g.shape = shapes[l % 4];
    g.color = {1.0f, 0.5f, 0.25f};
    g.size_min = 4;
    g.size_max = 6;
    w.glyphs.push_back(g);
    w.marginals.push_back(0.5);
  }
  return w;
}

std::string two_label_text(const std::string& extra) {
  return "labels = 2\ncanvas = 16\nchannels = 1\nnoise = 0\nseed = 7\n"
         "glyph 0 disk 1,1,1 4 6\nglyph 1 square 0.5,0.5,0.5 4 6\n"
         "marginal 0 = 0.8\nmarginal 1 = 0.6\n" +
         extra;
}

std::string dataset_bytes(const Dataset& d) {
  std::ostringstream os(std::ios::binary);
  save_dataset(os, d);
  return os.str();
}

}  // namespace

TEST_SUITE_BEGIN("synth");

TEST_CASE("world text round-trips through parse") {
  WorldSpec w = make_world(3);
  w.noise = 0.02;
  w.cooc[{0, 2}] = 0.3;
  w.rules.push_back({0, 1, Relation::kAbove, 0.75});
  w.rules.push_back({2, 0, Relation::kNear, 1.0});
  w.marginals = {0.7, 0.4, 0.2};
  w.validate();
  const std::string text = w.to_text();
  const WorldSpec back = WorldSpec::parse_text(text);
  CHECK(back.to_text() == text);

  test::TempDir tmp("world");
  {
    std::ofstream os(tmp.file("w.txt"));
    os << text;
  }
  CHECK(WorldSpec::parse_file(tmp.file("w.txt")).to_text() == text);
}

TEST_CASE("world parsing rejects malformed lines") {
  CHECK_THROWS_AS(WorldSpec::parse_text("canvas = 16\n"), ConfigError);  // no labels
  CHECK_THROWS_AS(WorldSpec::parse_text(two_label_text("glyph 0 blob 1,1,1 4 6\n")), ConfigError);
  CHECK_THROWS_AS(WorldSpec::parse_text(two_label_text("rule 0 beside 1 = 1\n")), ConfigError);
  CHECK_THROWS_AS(WorldSpec::parse_text(two_label_text("marginal 1 = 0.5\n")), ConfigError);
  CHECK_THROWS_AS(WorldSpec::parse_text(two_label_text("glyph 5 disk 1,1,1 4 6\n")), ConfigError);
  CHECK_THROWS_AS(WorldSpec::parse_text(two_label_text("budget = 3\n")), ConfigError);
  CHECK_THROWS_AS(WorldSpec::parse_text(two_label_text("glyph 0 disk 1,1 4 6\n")), ConfigError);
  CHECK_THROWS_AS(
      WorldSpec::parse_text("labels = 1\nglyph 0 disk 1,1,1 4 6\n"),  // marginal missing
      ConfigError);
}

TEST_CASE("world validation rejects out-of-range numbers") {
  auto broken = [](auto mutate) {
    WorldSpec w = make_world(2);
    mutate(w);
    return w;
  };
  CHECK_THROWS_AS(broken([](WorldSpec& w) { w.marginals[0] = 1.5; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](WorldSpec& w) { w.canvas = 4; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](WorldSpec& w) { w.channels = 2; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](WorldSpec& w) { w.noise = -0.1; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](WorldSpec& w) { w.glyphs[0].size_min = 1; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](WorldSpec& w) { w.glyphs[0].size_max = 9; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](WorldSpec& w) { w.glyphs[1].color[2] = 1.5f; }).validate(),
                  ConfigError);
  CHECK_THROWS_AS(broken([](WorldSpec& w) { w.cooc[{0, 0}] = 0.5; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](WorldSpec& w) { w.cooc[{0, 5}] = 0.5; }).validate(), ConfigError);
  CHECK_THROWS_AS(broken([](WorldSpec& w) { w.rules.push_back({1, 1, Relation::kNear, 1.0}); })
                      .validate(),
                  ConfigError);
  CHECK_THROWS_AS(broken([](WorldSpec& w) { w.rules.push_back({0, 1, Relation::kNear, 1.5}); })
                      .validate(),
                  ConfigError);
}

TEST_CASE("hard same-axis rule cycles are rejected; soft or mixed ones pass") {
  WorldSpec two = make_world(2);
  two.rules = {{0, 1, Relation::kAbove, 1.0}, {0, 1, Relation::kBelow, 1.0}};
  CHECK_THROWS_AS(two.validate(), ConfigError);

  WorldSpec chain = make_world(3);
  chain.rules = {{0, 1, Relation::kLeftOf, 1.0},
                 {1, 2, Relation::kLeftOf, 1.0},
                 {2, 0, Relation::kLeftOf, 1.0}};
  CHECK_THROWS_AS(chain.validate(), ConfigError);

  // Restating one ordering two ways is consistent, not cyclic.
  WorldSpec restated = make_world(2);
  restated.rules = {{0, 1, Relation::kAbove, 1.0}, {1, 0, Relation::kBelow, 1.0}};
  CHECK_NOTHROW(restated.validate());

  // The same arrangement across different axes is satisfiable.
  WorldSpec mixed = make_world(2);
  mixed.rules = {{0, 1, Relation::kAbove, 1.0}, {1, 0, Relation::kLeftOf, 1.0}};
  CHECK_NOTHROW(mixed.validate());

  // Soft rules never participate in the cycle check.
  WorldSpec soft = make_world(2);
  soft.rules = {{0, 1, Relation::kAbove, 0.9}, {0, 1, Relation::kBelow, 1.0}};
  CHECK_NOTHROW(soft.validate());
}

TEST_CASE("structure sampling is a pure function of seed and index") {
  const WorldSpec w = make_world(3);
  for (std::uint64_t idx : {0ull, 1ull, 97ull}) {
    const SampleStructure a = sample_structure(w, idx);
    const SampleStructure b = sample_structure(w, idx);
    CHECK(a.present == b.present);
    CHECK(a.sizes == b.sizes);
    CHECK(a.centers == b.centers);
    CHECK(a.relaxed == b.relaxed);
  }
  // Neighbouring indices do not share their stream.
  int diff = 0;
  for (std::uint64_t idx = 0; idx < 64; ++idx) {
    const SampleStructure a = sample_structure(w, idx);
    const SampleStructure b = sample_structure(w, idx + 1);
    diff += a.present != b.present || a.centers != b.centers;
  }
  CHECK(diff > 48);
}

TEST_CASE("co-occurrence entries override the marginal of later labels") {
  // Hard positive pull: label 1 follows label 0 despite a zero marginal.
  WorldSpec pull = make_world(2);
  pull.marginals = {1.0, 0.0};
  pull.cooc[{0, 1}] = 1.0;
  // Hard negative push: label 1 vanishes despite a unit marginal.
  WorldSpec push = make_world(2);
  push.marginals = {1.0, 1.0};
  push.cooc[{0, 1}] = 0.0;
  for (std::uint64_t idx = 0; idx < 200; ++idx) {
    const SampleStructure a = sample_structure(pull, idx);
    CHECK(a.present == std::vector<std::uint8_t>{1, 1});
    const SampleStructure b = sample_structure(push, idx);
    CHECK(b.present == std::vector<std::uint8_t>{1, 0});
  }

  // Two present parents average their entries: (1 + 0) / 2.
  WorldSpec avg = make_world(3);
  avg.marginals = {1.0, 1.0, 0.0};
  avg.cooc[{0, 2}] = 1.0;
  avg.cooc[{1, 2}] = 0.0;
  int hits = 0;
  const int n = 4000;
  for (std::uint64_t idx = 0; idx < n; ++idx) hits += sample_structure(avg, idx).present[2];
  const double rate = static_cast<double>(hits) / n;
  CHECK(rate > 0.45);
  CHECK(rate < 0.55);
}

TEST_CASE("unit compliance holds exactly among co-present labels; zero compliance inverts") {
  WorldSpec w = make_world(2);
  w.marginals = {0.9, 0.9};
  w.rules = {{0, 1, Relation::kAbove, 1.0}};
  WorldSpec inv = w;
  inv.rules[0].compliance = 0.0;
  int pairs = 0;
  for (std::uint64_t idx = 0; idx < 600; ++idx) {
    const SampleStructure s = sample_structure(w, idx);
    if (s.present[0] && s.present[1]) {
      REQUIRE_FALSE(s.relaxed);
      CHECK(s.centers[0][0] < s.centers[1][0]);
      ++pairs;
    }
    const SampleStructure t = sample_structure(inv, idx);
    if (t.present[0] && t.present[1]) {
      REQUIRE_FALSE(t.relaxed);
      CHECK(t.centers[0][0] >= t.centers[1][0]);
    }
  }
  CHECK(pairs > 400);
}

TEST_CASE("half compliance realizes near one half") {
  WorldSpec w = make_world(2);
  w.marginals = {0.95, 0.95};
  w.rules = {{0, 1, Relation::kLeftOf, 0.5}};
  const WorldReport rep = validate_world(w, 4000);
  REQUIRE(rep.rule_pairs[0] > 3000);
  CHECK(rep.rule_realized[0] > 0.45);
  CHECK(rep.rule_realized[0] < 0.55);
  CHECK(rep.rule_flagged[0] == 0);
}

TEST_CASE("rules over never co-present labels stay unmeasured") {
  WorldSpec w = make_world(2);
  w.marginals = {1.0, 0.0};
  w.rules = {{0, 1, Relation::kAbove, 1.0}};
  const WorldReport rep = validate_world(w, 500);
  CHECK(rep.rule_pairs[0] == 0);
  CHECK(rep.rule_realized[0] == -1.0);
  CHECK(rep.rule_flagged[0] == 0);
}

TEST_CASE("realized marginals match a direct recount and the configured rates") {
  WorldSpec w = make_world(3);
  w.marginals = {0.7, 0.4, 0.2};
  const int probe = 5000;
  const WorldReport rep = validate_world(w, probe);

  std::vector<int> counts(3, 0);
  for (int i = 0; i < probe; ++i) {
    const SampleStructure s = sample_structure(w, static_cast<std::uint64_t>(i));
    for (int l = 0; l < 3; ++l) counts[static_cast<std::size_t>(l)] += s.present[static_cast<std::size_t>(l)];
  }
  for (int l = 0; l < 3; ++l) {
    const double direct = static_cast<double>(counts[static_cast<std::size_t>(l)]) / probe;
    CHECK(rep.realized_marginals[static_cast<std::size_t>(l)] == doctest::Approx(direct).epsilon(1e-12));
    const double expect = w.marginals[static_cast<std::size_t>(l)];
    const double se = std::sqrt(expect * (1.0 - expect) / probe);
    CHECK(std::abs(direct - expect) <= 3.0 * se);
    CHECK(rep.marginal_flagged[static_cast<std::size_t>(l)] == 0);
    // diagonal of the joint table restates the marginal
    CHECK(rep.pair_joint[static_cast<std::size_t>(l) * 3 + l] ==
          doctest::Approx(rep.realized_marginals[static_cast<std::size_t>(l)]));
  }
  CHECK(rep.ok);
  CHECK(rep.warnings.empty());
}

TEST_CASE("contradictory near rules trip the placement cap and warn") {
  // near and not-near on the same pair cannot both be enforced; every
  // co-present draw exhausts its attempts and keeps the last placement.
  WorldSpec w = make_world(2);
  w.marginals = {1.0, 1.0};
  w.rules = {{0, 1, Relation::kNear, 1.0}, {0, 1, Relation::kNear, 0.0}};
  w.validate();  // not a cycle: distance is no ordering
  CHECK(sample_structure(w, 0).relaxed);

  std::vector<std::string> warnings;
  const Dataset d = generate(w, 3, 1, 1, &warnings);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("placement cap") != std::string::npos);
  CHECK(warnings[0].find("5 of 5") != std::string::npos);
  CHECK(d.total() == 5);

  const WorldReport rep = validate_world(w, 20);
  CHECK_FALSE(rep.warnings.empty());
}

TEST_CASE("zero marginals and zero noise render black images") {
  WorldSpec w = make_world(2);
  w.marginals = {0.0, 0.0};
  const Dataset d = generate(w, 4, 1, 1, nullptr);
  for (const auto& s : d.samples) {
    CHECK(s.targets == std::vector<std::uint8_t>{0, 0});
    for (int i = 0; i < s.image.size(); ++i) CHECK(s.image[i] == 0.0f);
  }
}

TEST_CASE("glyphs brighten their recorded centers and stay on canvas") {
  WorldSpec w = make_world(1, 32);
  w.marginals = {1.0};
  w.glyphs[0].color = {1.0f, 1.0f, 1.0f};
  w.glyphs[0].size_min = w.glyphs[0].size_max = 6;
  for (std::uint64_t idx = 0; idx < 10; ++idx) {
    const SampleStructure s = sample_structure(w, idx);
    REQUIRE(s.present[0] == 1);
    const float cy = s.centers[0][0], cx = s.centers[0][1];
    CHECK(cy >= 3.0f);
    CHECK(cy <= 29.0f);
    CHECK(cx >= 3.0f);
    CHECK(cx <= 29.0f);
    const Tensorf img = render_sample(w, s, idx);
    // The pixel containing the center sits entirely inside the disk.
    CHECK(img(static_cast<int>(cy), static_cast<int>(cx), 0) == doctest::Approx(1.0));
  }
}

TEST_CASE("absent labels carry sentinel centers; present ones never do") {
  const WorldSpec w = make_world(3);
  for (std::uint64_t idx = 0; idx < 50; ++idx) {
    const SampleStructure s = sample_structure(w, idx);
    for (int l = 0; l < 3; ++l) {
      if (s.present[static_cast<std::size_t>(l)]) {
        CHECK(s.centers[static_cast<std::size_t>(l)][0] >= 0.0f);
        CHECK(s.sizes[static_cast<std::size_t>(l)] >= 4);
        CHECK(s.sizes[static_cast<std::size_t>(l)] <= 6);
      } else {
        CHECK(s.centers[static_cast<std::size_t>(l)] == std::array<float, 2>{-1.0f, -1.0f});
        CHECK(s.sizes[static_cast<std::size_t>(l)] == 0);
      }
    }
  }
}

TEST_CASE("pixel noise leaves structure alone and renders deterministically") {
  WorldSpec clean = make_world(2);
  WorldSpec noisy = clean;
  noisy.noise = 0.25;
  for (std::uint64_t idx = 0; idx < 20; ++idx) {
    const SampleStructure a = sample_structure(clean, idx);
    const SampleStructure b = sample_structure(noisy, idx);
    CHECK(a.present == b.present);
    CHECK(a.centers == b.centers);
  }
  const SampleStructure s = sample_structure(noisy, 3);
  const Tensorf r1 = render_sample(noisy, s, 3);
  const Tensorf r2 = render_sample(noisy, s, 3);
  CHECK(test::bit_equal(r1, r2));
  const Tensorf base = render_sample(clean, s, 3);
  CHECK(test::max_abs_diff(r1, base) > 0.0);
  for (int i = 0; i < r1.size(); ++i) {
    CHECK(r1[i] >= 0.0f);
    CHECK(r1[i] <= 1.0f);
  }
}

TEST_CASE("default split rounds val and test shares, remainder trains") {
  const WorldSpec w = make_world(2);
  const Dataset d = generate(w, 103, nullptr);
  CHECK(d.n_train == 72);
  CHECK(d.n_val == 10);
  CHECK(d.n_test == 21);
  CHECK(d.split_begin("train") == 0);
  CHECK(d.split_begin("val") == 72);
  CHECK(d.split_begin("test") == 82);
  CHECK(d.split_count("test") == 21);
  CHECK_THROWS_AS(d.split_begin("holdout"), ConfigError);

  const Dataset tiny = generate(w, 3, nullptr);
  CHECK(tiny.n_train == 2);
  CHECK(tiny.n_val == 0);
  CHECK(tiny.n_test == 1);

  const Dataset exact = generate(w, 5, 2, 3, nullptr);
  CHECK(exact.n_train == 5);
  CHECK(exact.n_val == 2);
  CHECK(exact.n_test == 3);
  CHECK(exact.total() == 10);

  CHECK_THROWS_AS(generate(w, 0, nullptr), ConfigError);
  CHECK_THROWS_AS(generate(w, 2, -1, 1, nullptr), ConfigError);

  // targets mirror center sentinels in the stored samples
  for (const auto& s : d.samples)
    for (int l = 0; l < 2; ++l)
      CHECK((s.targets[static_cast<std::size_t>(l)] == 1) ==
            (s.centers[static_cast<std::size_t>(l)][0] >= 0.0f));
}

TEST_CASE("generation is reproducible byte for byte and seed-sensitive") {
  WorldSpec w = make_world(2);
  w.noise = 0.05;
  const std::string once = dataset_bytes(generate(w, 24, nullptr));
  const std::string twice = dataset_bytes(generate(w, 24, nullptr));
  CHECK(once == twice);
  WorldSpec other = w;
  other.seed = 8;
  CHECK(dataset_bytes(generate(other, 24, nullptr)) != once);
}

TEST_CASE("dataset files round-trip and reject corruption") {
  const WorldSpec w = make_world(2);
  const Dataset d = generate(w, 10, nullptr);
  test::TempDir tmp("dataset");
  save_dataset_file(tmp.file("d.bin"), d);
  const Dataset back = load_dataset_file(tmp.file("d.bin"));
  CHECK(back.n_train == d.n_train);
  CHECK(back.num_labels == d.num_labels);
  REQUIRE(back.samples.size() == d.samples.size());
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    CHECK(test::bit_equal(back.samples[i].image, d.samples[i].image));
    CHECK(back.samples[i].targets == d.samples[i].targets);
    CHECK(back.samples[i].centers == d.samples[i].centers);
  }

  const std::string bytes = dataset_bytes(d);
  std::istringstream cut(bytes.substr(0, bytes.size() / 2), std::ios::binary);
  CHECK_THROWS_AS(load_dataset(cut, "cut"), DataError);
  std::string mangled = bytes;
  mangled[0] = 'X';
  std::istringstream bad(mangled, std::ios::binary);
  CHECK_THROWS_AS(load_dataset(bad, "bad"), DataError);
  CHECK_THROWS_AS(load_dataset_file(tmp.file("absent.bin")), DataError);
}

TEST_CASE("world reports render as text and json") {
  WorldSpec w = make_world(2);
  w.marginals = {0.8, 0.5};
  w.rules = {{0, 1, Relation::kAbove, 1.0}};
  const WorldReport rep = validate_world(w, 400);
  const std::string text = world_report_text(w, rep);
  CHECK(text.find("probe size 400") != std::string::npos);
  CHECK(text.find("above") != std::string::npos);
  const auto j = nlohmann::json::parse(world_report_json(w, rep));
  CHECK(j["probe_size"] == 400);
  CHECK(j["realized_marginals"].size() == 2);
  CHECK(j["rules"].size() == 1);
  CHECK(j.contains("ok"));
  CHECK_THROWS_AS(validate_world(w, 0), ConfigError);
}

TEST_SUITE_END();
