// Acceptance gate. Eight checks, one line each on stdout, exit code equal to
// the number of failures. Tolerances are pinned next to each check.
//
// 1. pooled readout identity        project-then-pool == pool-then-project
// 2. attention normalization        every softmax channel sums to one
// 3. full-model gradient check      reverse mode vs central differences
// 4. metric oracle agreement        evaluate() vs an independent rescoring
// 5. parameter budget               grouped design beats the dense layer
// 6. benchmark ablation             four-stage model beats the stage-1 head
// 7. staged training contracts      freezing, lr ladder, seeded reruns
// 8. protocol hand cases            worked examples, exact

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "srn/grad_check.hpp"
#include "srn/layers.hpp"
#include "srn/metrics.hpp"
#include "srn/model.hpp"
#include "srn/synth.hpp"
#include "srn/trainer.hpp"

namespace {

using Clock = std::chrono::steady_clock;

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

std::string sci(double v) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(1) << v;
  return os.str();
}

std::string signed4(double v) {
  std::ostringstream os;
  os << std::showpos << std::fixed << std::setprecision(4) << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// 1. Readout identity: classifying attention-pooled features must equal
// attention-pooling per-location classifications. 100 random instances at
// desk scale (8x8x64 features, 8 labels), per-label relative error <= 1e-5.
// ---------------------------------------------------------------------------
std::string check_readout_identity() {
  constexpr double kTol = 1e-5;
  constexpr int kH = 8, kW = 8, kD = 64, kC = 8, kTrials = 100;
  std::mt19937_64 rng(101);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> expo(-2.0, 2.0);
  double worst = 0.0;
  for (int t = 0; t < kTrials; ++t) {
    srn::Tensor<double> x({kH, kW, kD});
    for (long i = 0; i < x.size(); ++i) x.data()[i] = gauss(rng);
    const double scale = std::pow(10.0, expo(rng));
    srn::Tensor<double> z({kH, kW, kC});
    for (long i = 0; i < z.size(); ++i) z.data()[i] = scale * gauss(rng);
    const srn::Tensor<double> a = srn::spatial_softmax(z);
    srn::Tensor<double> wmat({kC, kD});
    for (long i = 0; i < wmat.size(); ++i) wmat.data()[i] = gauss(rng) / std::sqrt(double(kD));
    srn::Tensor<double> bias({kC});
    for (long i = 0; i < bias.size(); ++i) bias.data()[i] = 0.1 * gauss(rng);

    // Per-location logits via the real 1x1 convolution, then attention pool.
    const srn::ConvSpec spec{.in_channels = kD, .out_channels = kC};
    srn::Tensor<double> wconv({kC, 1, 1, kD});
    std::copy(wmat.data(), wmat.data() + wmat.size(), wconv.data());
    const srn::Tensor<double> s = srn::conv2d(x, spec, wconv, &bias);
    const srn::Tensor<double> pooled_logits = srn::spatial_sum_pool(srn::multiply(s, a));

    // Attention-pool the features, then classify once per label.
    const srn::Tensor<double> direct = srn::attention_logits_via_pooling(x, a, wmat, bias);

    for (int l = 0; l < kC; ++l) {
      const double u = pooled_logits[l], v = direct[l];
      const double rel = std::abs(u - v) / std::max({std::abs(u), std::abs(v), 1e-12});
      worst = std::max(worst, rel);
    }
  }
  require(worst <= kTol, "max rel err " + sci(worst) + " exceeds " + sci(kTol));
  return "max rel err " + sci(worst) + " over 100 instances";
}

// ---------------------------------------------------------------------------
// 2. Every spatial_softmax channel sums to 1 within 1e-6 and stays in [0, 1],
// over 1000 random shapes with magnitudes up to 1e3.
// ---------------------------------------------------------------------------
std::string check_softmax_normalization() {
  constexpr double kTol = 1e-6;
  std::mt19937_64 rng(202);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> side(1, 12), chan(1, 8);
  std::uniform_real_distribution<double> expo(-3.0, 3.0);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int h = side(rng), w = side(rng), c = chan(rng);
    const double scale = std::pow(10.0, expo(rng));
    srn::Tensor<double> z({h, w, c});
    for (long i = 0; i < z.size(); ++i) z.data()[i] = scale * gauss(rng);
    const srn::Tensor<double> a = srn::spatial_softmax(z);
    for (long i = 0; i < a.size(); ++i)
      require(std::isfinite(a.data()[i]) && a.data()[i] >= 0.0, "entry outside [0, inf)");
    for (int l = 0; l < c; ++l) {
      double sum = 0.0;
      for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) sum += a.data()[(long(i) * w + j) * c + l];
      worst = std::max(worst, std::abs(sum - 1.0));
    }
  }
  require(worst <= kTol, "max |sum-1| " + sci(worst) + " exceeds " + sci(kTol));
  return "max |sum-1| " + sci(worst) + " over 1000 tensors";
}

// ---------------------------------------------------------------------------
// 3. Full-model gradient check at desk scale, double precision, step 1e-4,
// relative tolerance 1e-4, up to 130 coordinates per parameter. A central
// difference is only trustworthy when no pre-ReLU activation sits within the
// step of zero, and with ~37k activations a random draw never clears that.
// A channel's bias shifts all of its pre-activations in lockstep, though, so
// walking the ReLU layers upstream-first and re-centering each channel on
// the widest value gap near zero buys the margin deterministically.
// ---------------------------------------------------------------------------
double relu_margin(srn::SrnModel<double>& model) {
  double margin = std::numeric_limits<double>::infinity();
  for (int id = 0; id < model.graph().num_nodes(); ++id) {
    const auto& nd = model.graph().node(id);
    if (nd.kind != srn::OpKind::kRelu) continue;
    const srn::Tensor<double>& v = model.exec().value(nd.args[0]);
    for (long i = 0; i < v.size(); ++i) margin = std::min(margin, std::abs(v.data()[i]));
  }
  return margin;
}

std::string check_full_model_gradients() {
  constexpr double kStep = 1e-4, kTol = 1e-4, kMargin = 2.5e-4, kShiftCap = 0.02;
  const srn::ModelConfig cfg;  // desk scale
  srn::SrnModel<double> model(cfg, 5);

  std::mt19937_64 data_rng(77);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  srn::Tensor<double> image({cfg.image_h, cfg.image_w, cfg.image_c});
  for (long i = 0; i < image.size(); ++i) image.data()[i] = unif(data_rng);
  srn::Tensor<double> targets({cfg.num_labels});
  for (long i = 0; i < targets.size(); ++i) targets.data()[i] = unif(data_rng) < 0.5 ? 0.0 : 1.0;
  targets.data()[0] = 1.0;
  const srn::Tensor<double> mask = srn::Tensor<double>::ones({cfg.num_labels});

  std::mt19937_64 jitter(17);
  std::normal_distribution<double> gauss(0.0, 0.05);
  for (auto& e : model.store().entries())
    for (long i = 0; i < e.value.size(); ++i) e.value.data()[i] += gauss(jitter);

  // min_i |vals[i] + delta| for sorted vals.
  const auto margin_at = [](const std::vector<double>& vals, double delta) {
    const auto it = std::lower_bound(vals.begin(), vals.end(), -delta);
    double m = std::numeric_limits<double>::infinity();
    if (it != vals.end()) m = std::min(m, std::abs(*it + delta));
    if (it != vals.begin()) m = std::min(m, std::abs(*(it - 1) + delta));
    return m;
  };

  for (int id = 0; id < model.graph().num_nodes(); ++id) {
    const auto& relu = model.graph().node(id);
    if (relu.kind != srn::OpKind::kRelu) continue;
    const auto& conv = model.graph().node(relu.args[0]);
    if (conv.kind != srn::OpKind::kConv2d || conv.args.size() < 3) continue;
    srn::Tensor<double>& bias = model.store().at(model.graph().node(conv.args[2]).pname).value;
    model.forward(image, &targets, &mask);
    const srn::Tensor<double>& v = model.exec().value(relu.args[0]);
    const int channels = v.dim(v.rank() - 1);
    const long hw = v.size() / channels;
    for (int ch = 0; ch < channels; ++ch) {
      std::vector<double> vals(static_cast<size_t>(hw));
      for (long i = 0; i < hw; ++i) vals[size_t(i)] = v.data()[i * channels + ch];
      std::sort(vals.begin(), vals.end());
      double best_delta = 0.0, best = margin_at(vals, 0.0);
      const auto consider = [&](double delta) {
        delta = std::clamp(delta, -kShiftCap, kShiftCap);
        if (const double m = margin_at(vals, delta); m > best) {
          best = m;
          best_delta = delta;
        }
      };
      consider(-kShiftCap);
      consider(kShiftCap);
      for (size_t i = 0; i + 1 < vals.size(); ++i)
        if (std::abs(vals[i]) < 2 * kShiftCap || std::abs(vals[i + 1]) < 2 * kShiftCap)
          consider(-(vals[i] + vals[i + 1]) / 2.0);
      bias.data()[ch] += best_delta;
    }
  }

  model.forward(image, &targets, &mask);
  const double margin = relu_margin(model);
  require(margin > kMargin, "ReLU margin " + sci(margin) + " not cleared by bias retuning");

  // The attention-logit bias is a flat direction: adding a constant to one
  // channel of Z cancels inside that channel's softmax, so the loss does not
  // move at all and the true gradient is exactly zero. A finite-difference
  // quotient there is pure roundoff measured against the oracle's 1e-8
  // denominator floor, which no double-precision run can clear. Verify the
  // flatness at a macroscopic step and the analytic zero instead, and give
  // the bias a one-off frozen group so the sweep skips just those 8 numbers.
  const std::vector<srn::Tensor<double>> inputs = {image, targets, mask};
  const double base_loss = model.value(srn::graph_names::kLossJoint)[0];
  {
    auto& bias = model.store().at("att.c3.b");
    for (int l = 0; l < cfg.num_labels; ++l) {
      const double saved = bias.value.data()[l];
      bias.value.data()[l] = saved + 0.1;
      model.forward(image, &targets, &mask);
      const double moved = model.value(srn::graph_names::kLossJoint)[0];
      bias.value.data()[l] = saved;
      require(std::abs(moved - base_loss) <= 1e-11 * std::max(1.0, std::abs(base_loss)),
              "loss not flat along att.c3.b[" + std::to_string(l) + "]");
    }
    srn::forward_backward(model.graph(), inputs, model.store());
    for (int l = 0; l < cfg.num_labels; ++l)
      require(std::abs(bias.grad.data()[l]) <= 1e-10, "analytic gradient of att.c3.b not zero");
    bias.group = "att_logit_gauge";
    model.store().set_group_frozen("att_logit_gauge", true);
  }

  const srn::CheckReport rep = srn::grad_check(model.graph(), inputs, model.store(), kStep, kTol, 130);
  require(rep.passed, "max rel err " + sci(rep.max_rel_err) + " at " + rep.worst_param + "[" +
                          std::to_string(rep.worst_index) + "]");
  return "max rel err " + sci(rep.max_rel_err) + ", " + std::to_string(rep.coords_checked) +
         " coords, margin " + sci(margin) + ", flat logit bias proven";
}

// ---------------------------------------------------------------------------
// 4. evaluate() against an independent rescoring of 50 random 50x8 sets for
// the all, top-3, and top-3-filtered protocols, agreement to 1e-12.
// ---------------------------------------------------------------------------
struct OracleStats {
  double p_c = 0, r_c = 0, f1_c = 0, p_o = 0, r_o = 0, f1_o = 0;
};

bool oracle_valid(const srn::PredictionSet& p, int i, int l) {
  return p.mask.empty() || p.mask[size_t(i) * p.c + l] != 0;
}

std::vector<std::uint8_t> oracle_binarize_all(const srn::PredictionSet& p, double thr) {
  std::vector<std::uint8_t> out(size_t(p.n) * p.c, 0);
  for (int i = 0; i < p.n; ++i)
    for (int l = 0; l < p.c; ++l)
      if (oracle_valid(p, i, l) && p.score(i, l) > thr) out[size_t(i) * p.c + l] = 1;
  return out;
}

std::vector<std::uint8_t> oracle_binarize_topk(const srn::PredictionSet& p, int k,
                                               std::optional<double> filter) {
  std::vector<std::uint8_t> out(size_t(p.n) * p.c, 0);
  for (int i = 0; i < p.n; ++i) {
    std::vector<int> labels;
    for (int l = 0; l < p.c; ++l)
      if (oracle_valid(p, i, l)) labels.push_back(l);
    std::sort(labels.begin(), labels.end(), [&](int a, int b) {
      return p.score(i, a) > p.score(i, b) || (p.score(i, a) == p.score(i, b) && a < b);
    });
    const int take = std::min<int>(k, int(labels.size()));
    for (int r = 0; r < take; ++r) {
      const int l = labels[size_t(r)];
      if (filter && p.score(i, l) < *filter) continue;
      out[size_t(i) * p.c + l] = 1;
    }
  }
  return out;
}

std::pair<double, bool> oracle_ap(const srn::PredictionSet& p, int l) {
  std::vector<int> rows;
  for (int i = 0; i < p.n; ++i)
    if (oracle_valid(p, i, l)) rows.push_back(i);
  std::sort(rows.begin(), rows.end(), [&](int a, int b) {
    return p.score(a, l) > p.score(b, l) || (p.score(a, l) == p.score(b, l) && a < b);
  });
  int hits = 0;
  double sum = 0.0;
  for (size_t r = 0; r < rows.size(); ++r)
    if (p.target(rows[r], l)) {
      ++hits;
      sum += double(hits) / double(r + 1);
    }
  return hits ? std::make_pair(sum / hits, true) : std::make_pair(0.0, false);
}

OracleStats oracle_macro_micro(const std::vector<std::uint8_t>& pred,
                               const srn::PredictionSet& p) {
  auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
  OracleStats o;
  long tp_all = 0, fp_all = 0, fn_all = 0;
  for (int l = 0; l < p.c; ++l) {
    long tp = 0, fp = 0, fn = 0;
    for (int i = 0; i < p.n; ++i) {
      if (!oracle_valid(p, i, l)) continue;
      const bool pr = pred[size_t(i) * p.c + l] != 0, tg = p.target(i, l);
      tp += pr && tg;
      fp += pr && !tg;
      fn += !pr && tg;
    }
    const double pc = ratio(double(tp), double(tp + fp)), rc = ratio(double(tp), double(tp + fn));
    o.p_c += pc;
    o.r_c += rc;
    o.f1_c += ratio(2.0 * pc * rc, pc + rc);
    tp_all += tp;
    fp_all += fp;
    fn_all += fn;
  }
  o.p_c /= p.c;
  o.r_c /= p.c;
  o.f1_c /= p.c;
  o.p_o = ratio(double(tp_all), double(tp_all + fp_all));
  o.r_o = ratio(double(tp_all), double(tp_all + fn_all));
  o.f1_o = ratio(2.0 * o.p_o * o.r_o, o.p_o + o.r_o);
  return o;
}

std::string check_metric_oracle() {
  constexpr double kTol = 1e-12;
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const std::vector<srn::Protocol> protos = {srn::Protocol::all(), srn::Protocol::top(3),
                                             srn::Protocol::top_filtered(3, 0.5)};
  double worst = 0.0;
  auto track = [&](double a, double b) {
    worst = std::max(worst, std::abs(a - b));
    require(std::abs(a - b) <= kTol, "oracle mismatch " + sci(std::abs(a - b)));
  };
  for (int t = 0; t < 50; ++t) {
    srn::PredictionSet p;
    p.n = 50;
    p.c = 8;
    for (int i = 0; i < p.n * p.c; ++i) {
      double s = unif(rng);
      if (unif(rng) < 0.3) s = std::round(s * 10.0) / 10.0;  // planted score ties
      p.scores.push_back(s);
      p.targets.push_back(unif(rng) < 0.3 ? 1 : 0);
    }
    if (t % 2 == 0) {
      for (int i = 0; i < p.n * p.c; ++i) p.mask.push_back(unif(rng) < 0.9 ? 1 : 0);
    }
    p.validate();

    const srn::MetricsReport rep = srn::evaluate(p, protos);
    double map = 0.0;
    int included = 0;
    for (int l = 0; l < p.c; ++l) {
      const auto [ap, inc] = oracle_ap(p, l);
      require(inc == rep.per_class[size_t(l)].included, "inclusion flag mismatch");
      track(ap, rep.per_class[size_t(l)].ap);
      if (inc) {
        map += ap;
        ++included;
      }
    }
    track(included ? map / included : 0.0, rep.map);

    const std::array<std::vector<std::uint8_t>, 3> preds = {
        oracle_binarize_all(p, 0.5), oracle_binarize_topk(p, 3, std::nullopt),
        oracle_binarize_topk(p, 3, 0.5)};
    for (size_t j = 0; j < protos.size(); ++j) {
      const OracleStats o = oracle_macro_micro(preds[j], p);
      const srn::ProtocolMetrics& m = rep.protocols[j];
      track(o.p_c, m.p_c);
      track(o.r_c, m.r_c);
      track(o.f1_c, m.f1_c);
      track(o.p_o, m.p_o);
      track(o.r_o, m.r_o);
      track(o.f1_o, m.f1_o);
    }
  }
  return "max |diff| " + sci(worst) + " over 50 sets x 3 protocols";
}

// ---------------------------------------------------------------------------
// 5. Parameter budget at full scale (14x14x1024 features, 80 labels,
// 512-wide regularization convs, 4 kernels per group): the dense one-layer
// alternative costs conv4_out*14*14 weights per label (about 0.4M each,
// 32,112,640 total), while everything the regularization pathway adds stays
// in the single millions. Closed forms are cross-checked against the counts
// actually declared by the graph.
// ---------------------------------------------------------------------------
std::string check_parameter_budget() {
  srn::ModelConfig cfg;
  cfg.image_h = cfg.image_w = 224;
  cfg.image_c = 3;
  cfg.feature_h = cfg.feature_w = 14;
  cfg.feature_d = 1024;
  cfg.num_labels = 80;
  cfg.backbone_widths = {64, 128, 256, 1024};
  cfg.att_hidden = 512;
  cfg.sr_conv2_out = 512;
  cfg.sr_conv3_out = 512;
  cfg.sr_kernels_per_group = 4;
  cfg.validate();

  require(cfg.conv4_out() == 2048, "conv4_out != 2048");
  const long naive = srn::naive_single_layer_count(cfg);
  require(naive == 2048L * 14 * 14 * 80, "dense count formula broken");
  require(naive == 32112640L, "dense count != 32112640");
  const long per_label = naive / cfg.num_labels;
  require(std::abs(per_label - 400000L) < 5000L, "per-label dense cost not ~0.4M");

  const long added = srn::srn_additional_param_count(cfg);
  require(added >= 1000000L && added < 10000000L, "added params " + std::to_string(added) +
                                                      " outside the single millions");

  srn::Graph g = srn::build_feature_graph(cfg);
  srn::ParamStore<float> store;
  g.declare_params(store);
  namespace pg = srn::param_groups;
  require(store.group_param_count(pg::kAtt) == srn::att_param_count(cfg), "att count mismatch");
  require(store.group_param_count(pg::kConv1) == srn::conv1_param_count(cfg),
          "conv1 count mismatch");
  require(store.group_param_count(pg::kSr) == srn::fsr_param_count(cfg), "f_sr count mismatch");

  std::ostringstream os;
  os << "added " << added << " vs dense " << naive << " (" << std::fixed << std::setprecision(1)
     << double(naive) / double(added) << "x)";
  return os.str();
}

// ---------------------------------------------------------------------------
// 6. Benchmark ablation. Train on the planted-relation benchmark (2000/300/
// 500) for three seeds; after stage 1 score the classifier head, after
// stages 2-4 score the aggregate head. Median test mAP gain must reach 0.02.
// ---------------------------------------------------------------------------
double test_map(srn::SrnModel<float>& model, const srn::Dataset& data, const std::string& head) {
  const int begin = data.split_begin("test"), count = data.split_count("test");
  srn::PredictionSet p;
  p.n = count;
  p.c = data.num_labels;
  for (int i = 0; i < count; ++i) {
    const srn::Sample& s = data.samples[size_t(begin + i)];
    const srn::Tensor<float> img =
        srn::plain_resize(s.image.cast<float>(), model.config().image_h, model.config().image_w);
    model.forward(img);
    const auto& logits = model.value(head);
    for (int l = 0; l < p.c; ++l)
      p.scores.push_back(srn::sigmoid_scalar(double(logits[l])));
    p.targets.insert(p.targets.end(), s.targets.begin(), s.targets.end());
  }
  p.validate();
  return srn::evaluate(p, {}).map;
}

std::string check_benchmark_ablation() {
  constexpr double kMinMedianGain = 0.02;
  const std::string root = SRN_SOURCE_DIR;
  const srn::WorldSpec world = srn::WorldSpec::parse_file(root + "/configs/benchmark_world.txt");
  const srn::Dataset data = srn::generate(world, 2000, 300, 500);
  srn::TrainConfig tc = srn::TrainConfig::from_file(root + "/configs/benchmark_train.txt");
  const srn::ModelConfig cfg;  // desk scale, matches the benchmark canvas

  std::vector<double> gains;
  std::ostringstream detail;
  for (const std::uint64_t seed : {11ull, 12ull, 13ull}) {
    tc.seed = seed;
    srn::SrnModel<float> model(cfg, seed);
    srn::train_stages(model, data, tc, {1});
    const double base = test_map(model, data, srn::graph_names::kYCls);
    srn::train_stages(model, data, tc, {2, 3, 4});
    const double full = test_map(model, data, srn::graph_names::kYHat);
    gains.push_back(full - base);
    detail << (gains.size() > 1 ? " " : "") << signed4(full - base);
  }
  std::vector<double> sorted = gains;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[1];
  require(median >= kMinMedianGain,
          "median mAP gain " + signed4(median) + " below " + signed4(kMinMedianGain));
  return "median mAP gain " + signed4(median) + " (seeds 11/12/13: " + detail.str() + ")";
}

// ---------------------------------------------------------------------------
// 7. Training contracts on a miniature run: stage 1 must leave the
// regularization groups bit-identical, the lr ladder starts at lr_init and
// never rises or dips under the floor, and same-seed reruns produce
// byte-identical checkpoints.
// ---------------------------------------------------------------------------
std::string check_training_contracts() {
  const srn::WorldSpec world = srn::WorldSpec::parse_text(R"(labels = 2
canvas = 16
channels = 1
noise = 0.02
seed = 21
glyph 0 disk 1,0.3,0.2 4 6
glyph 1 square 0.2,0.4,1 4 6
marginal 0 = 0.9
marginal 1 = 0.9
rule 0 above 1 = 1
)");
  const srn::Dataset mini = srn::generate(world, 30, 6, 8);
  const srn::ModelConfig cfg = srn::ModelConfig::from_text(R"(image_h = 16
image_w = 16
image_c = 1
feature_h = 4
feature_w = 4
feature_d = 8
num_labels = 2
backbone = 8,8
att_hidden = 4
sr_conv2_out = 4
sr_conv3_out = 4
sr_kernels_per_group = 2
)");
  srn::TrainConfig tc;
  tc.batch_size = 8;
  tc.lr_init = 0.01;
  tc.max_epochs = 5;
  tc.seed = 9;

  // Stage 1 freezing: regularization groups must not move at all.
  namespace pg = srn::param_groups;
  {
    srn::SrnModel<float> m(cfg, tc.seed);
    std::vector<srn::Tensor<float>> before;
    for (const auto& e : m.store().entries()) before.push_back(e.value);
    srn::run_stage(m, mini, tc, srn::StagePlan::standard().stage(1));
    bool trained_moved = false;
    for (size_t k = 0; k < m.store().entries().size(); ++k) {
      const auto& e = m.store().entries()[k];
      const bool frozen = e.group == pg::kAtt || e.group == pg::kConv1 || e.group == pg::kSr;
      bool same = true;
      for (long i = 0; i < e.value.size(); ++i)
        same = same && e.value.data()[i] == before[k].data()[i];
      if (frozen) require(same, "frozen parameter " + e.name + " moved in stage 1");
      trained_moved = trained_moved || !same;
    }
    require(trained_moved, "stage 1 trained nothing");
  }

  // Learning-rate ladder across all four stages.
  {
    srn::SrnModel<float> m(cfg, tc.seed);
    const srn::TrainRunReport run = srn::train_stages(m, mini, tc, {1, 2, 3, 4});
    for (const srn::StageReport& st : run.stages) {
      require(!st.epochs.empty(), "stage without epochs");
      require(st.epochs.front().lr == tc.lr_init, "stage does not restart at lr_init");
      for (size_t i = 0; i + 1 < st.epochs.size(); ++i)
        require(st.epochs[i + 1].lr <= st.epochs[i].lr, "lr increased inside a stage");
      for (const srn::EpochRecord& ep : st.epochs)
        require(ep.lr >= tc.lr_floor, "lr fell under the floor");
    }
  }

  // Seeded reruns: byte-identical checkpoints; a different seed diverges.
  auto checkpoint_bytes = [&](std::uint64_t seed) {
    srn::TrainConfig t2 = tc;
    t2.seed = seed;
    srn::SrnModel<float> m(cfg, seed);
    srn::train_stages(m, mini, t2, {1, 2});
    std::ostringstream os(std::ios::binary);
    srn::save_checkpoint(os, cfg, m.store(), 2);
    return os.str();
  };
  const std::string a = checkpoint_bytes(9), b = checkpoint_bytes(9), c = checkpoint_bytes(10);
  require(a == b, "same seed produced different checkpoints");
  require(a != c, "different seed produced identical checkpoints");

  return "freeze bit-identity, lr ladder, " + std::to_string(a.size()) + "-byte reruns identical";
}

// ---------------------------------------------------------------------------
// 8. Protocol hand cases, checked exactly.
// ---------------------------------------------------------------------------
std::string check_protocol_hand_cases() {
  int checks = 0;
  auto near = [&](double a, double b) {
    require(std::abs(a - b) <= 1e-15, "hand case off by " + sci(std::abs(a - b)));
    ++checks;
  };
  auto same = [&](const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
    require(a == b, "hand-case binarization mismatch");
    ++checks;
  };
  auto set = [](int n, int c, std::vector<double> s, std::vector<std::uint8_t> t) {
    srn::PredictionSet p;
    p.n = n;
    p.c = c;
    p.scores = std::move(s);
    p.targets = std::move(t);
    p.validate();
    return p;
  };

  // Two images, two labels: both predict label 0; truth is one of each.
  {
    const srn::PredictionSet p = set(2, 2, {0.9, 0.1, 0.9, 0.1}, {1, 0, 0, 1});
    const srn::MetricsReport r = srn::evaluate(p, {srn::Protocol::all()});
    const srn::ProtocolMetrics& m = r.protocols[0];
    near(m.p_o, 0.5);
    near(m.r_o, 0.5);
    near(m.f1_o, 0.5);
    near(m.p_c, 0.25);
    near(m.r_c, 0.5);
    near(m.f1_c, 1.0 / 3.0);
  }

  // Top-3 overrides the threshold; the filtered variant restores it.
  const srn::PredictionSet q = set(1, 4, {0.9, 0.4, 0.3, 0.1}, {1, 0, 0, 0});
  same(srn::binarize_topk(q, 3), {1, 1, 1, 0});
  same(srn::binarize_topk(q, 3, 0.5), {1, 0, 0, 0});
  same(srn::binarize_all(q, 0.5), {1, 0, 0, 0});

  // Strict threshold: a score of exactly 0.5 stays negative.
  same(srn::binarize_all(set(1, 2, {0.5, 0.6}, {1, 1}), 0.5), {0, 1});

  // Tie at the top-k cut goes to the lower label index.
  same(srn::binarize_topk(set(1, 4, {0.7, 0.7, 0.7, 0.2}, {1, 1, 1, 0}), 2), {1, 1, 0, 0});

  // Ranking AP: positives at ranks 1 and 3 of 3.
  {
    const srn::ClassAp ap = srn::per_class_ap({0.9, 0.8, 0.7}, {1, 0, 1});
    near(ap.ap, (1.0 + 2.0 / 3.0) / 2.0);
    require(ap.included && ap.positives == 2, "AP bookkeeping wrong");
    ++checks;
  }

  // mAP averages only classes that have a positive example.
  {
    const srn::PredictionSet p = set(2, 2, {0.8, 0.3, 0.2, 0.6}, {1, 0, 0, 0});
    const srn::MetricsReport r = srn::evaluate(p, {});
    require(r.per_class[0].included && !r.per_class[1].included, "inclusion flags wrong");
    ++checks;
    near(r.map, r.per_class[0].ap);
    near(r.map, 1.0);
  }

  return std::to_string(checks) + " hand checks";
}

}  // namespace

int main() {
  int failures = 0;
  const auto run = [&failures](int number, const std::string& name, auto&& body) {
    const auto t0 = Clock::now();
    std::string detail;
    bool ok = true;
    try {
      detail = body();
    } catch (const std::exception& e) {
      ok = false;
      detail = e.what();
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    std::ostringstream line;
    line << (ok ? "PASS" : "FAIL") << " criterion " << number << ": " << name << " (" << detail
         << ") [" << std::fixed << std::setprecision(1) << secs << "s]";
    std::cout << line.str() << std::endl;
    failures += ok ? 0 : 1;
  };

  run(1, "pooled readout identity", check_readout_identity);
  run(2, "attention normalization", check_softmax_normalization);
  run(3, "full-model gradient check", check_full_model_gradients);
  run(4, "metric oracle agreement", check_metric_oracle);
  run(5, "parameter budget", check_parameter_budget);
  run(6, "benchmark ablation", check_benchmark_ablation);
  run(7, "staged training contracts", check_training_contracts);
  run(8, "protocol hand cases", check_protocol_hand_cases);
  return failures;
}
