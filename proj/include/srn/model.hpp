#ifndef SRN_MODEL_HPP_
#define SRN_MODEL_HPP_

#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "srn/binary_io.hpp"
#include "srn/grad_check.hpp"
#include "srn/graph.hpp"
#include "srn/kv.hpp"

namespace srn {

/// Architecture description. Desk-scale defaults; the full-scale variant
/// (14x14x1024 features, C around 80, 512-wide regularization convs) is a
/// configuration of the same structure.
struct ModelConfig {
  int image_h = 32, image_w = 32, image_c = 3;
  int feature_h = 8, feature_w = 8, feature_d = 64;
  int num_labels = 8;
  std::vector<int> backbone_widths = {16, 32, 64};
  int att_hidden = 32;
  int sr_conv2_out = 32;
  int sr_conv3_out = 32;
  int sr_kernels_per_group = 4;
  double alpha = 0.5;

  int conv4_out() const { return sr_conv3_out * sr_kernels_per_group; }

  /// Number of 2x downsampling steps between image and feature grid.
  int downsample_steps() const {
    int steps = 0, h = image_h;
    while (h > feature_h) {
      h /= 2;
      ++steps;
    }
    return steps;
  }

  void validate() const {
    auto positive = [](int v, const char* what) {
      if (v <= 0) throw ConfigError(std::string("ModelConfig: ") + what + " must be positive");
    };
    positive(image_h, "image_h");
    positive(image_w, "image_w");
    positive(image_c, "image_c");
    positive(feature_h, "feature_h");
    positive(feature_w, "feature_w");
    positive(feature_d, "feature_d");
    positive(num_labels, "num_labels");
    positive(att_hidden, "att_hidden");
    positive(sr_conv2_out, "sr_conv2_out");
    positive(sr_conv3_out, "sr_conv3_out");
    positive(sr_kernels_per_group, "sr_kernels_per_group");
    if (alpha < 0.0 || alpha > 1.0)
      throw ConfigError("ModelConfig: alpha " + std::to_string(alpha) + " outside [0, 1]");
    if (backbone_widths.empty()) throw ConfigError("ModelConfig: backbone needs at least 1 block");
    if (backbone_widths.back() != feature_d)
      throw ConfigError("ModelConfig: last backbone width " +
                        std::to_string(backbone_widths.back()) + " must equal feature_d " +
                        std::to_string(feature_d));
    int h = image_h, w = image_w;
    const int steps = downsample_steps();
    for (int i = 0; i < steps; ++i) {
      if (h % 2 != 0 || w % 2 != 0)
        throw ConfigError("ModelConfig: image extent not divisible down to feature grid");
      h /= 2;
      w /= 2;
    }
    if (h != feature_h || w != feature_w)
      throw ConfigError("ModelConfig: image " + std::to_string(image_h) + "x" +
                        std::to_string(image_w) + " does not reduce to feature " +
                        std::to_string(feature_h) + "x" + std::to_string(feature_w) +
                        " by halving");
    if (steps > static_cast<int>(backbone_widths.size()))
      throw ConfigError("ModelConfig: " + std::to_string(steps) +
                        " downsampling steps need at least that many backbone blocks");
  }

  std::string to_text() const {
    std::ostringstream os;
    os << "image_h = " << image_h << "\nimage_w = " << image_w << "\nimage_c = " << image_c
       << "\nfeature_h = " << feature_h << "\nfeature_w = " << feature_w
       << "\nfeature_d = " << feature_d << "\nnum_labels = " << num_labels << "\nbackbone = ";
    for (std::size_t i = 0; i < backbone_widths.size(); ++i)
      os << (i ? "," : "") << backbone_widths[i];
    os << "\natt_hidden = " << att_hidden << "\nsr_conv2_out = " << sr_conv2_out
       << "\nsr_conv3_out = " << sr_conv3_out
       << "\nsr_kernels_per_group = " << sr_kernels_per_group << "\nalpha = " << alpha << "\n";
    return os.str();
  }

  static ModelConfig from_kv(const KvFile& kv) {
    ModelConfig c;
    c.image_h = static_cast<int>(kv.get_int("image_h", c.image_h));
    c.image_w = static_cast<int>(kv.get_int("image_w", c.image_w));
    c.image_c = static_cast<int>(kv.get_int("image_c", c.image_c));
    c.feature_h = static_cast<int>(kv.get_int("feature_h", c.feature_h));
    c.feature_w = static_cast<int>(kv.get_int("feature_w", c.feature_w));
    c.feature_d = static_cast<int>(kv.get_int("feature_d", c.feature_d));
    c.num_labels = static_cast<int>(kv.get_int("num_labels", c.num_labels));
    if (kv.has("backbone")) {
      c.backbone_widths.clear();
      for (long v : kv.get_int_list("backbone")) c.backbone_widths.push_back(static_cast<int>(v));
    }
    c.att_hidden = static_cast<int>(kv.get_int("att_hidden", c.att_hidden));
    c.sr_conv2_out = static_cast<int>(kv.get_int("sr_conv2_out", c.sr_conv2_out));
    c.sr_conv3_out = static_cast<int>(kv.get_int("sr_conv3_out", c.sr_conv3_out));
    c.sr_kernels_per_group = static_cast<int>(kv.get_int("sr_kernels_per_group", c.sr_kernels_per_group));
    c.alpha = kv.get_real("alpha", c.alpha);
    c.validate();
    return c;
  }

  static ModelConfig from_text(const std::string& text) {
    return from_kv(KvFile::parse_text(text, "<model config>"));
  }
  static ModelConfig from_file(const std::string& path) {
    return from_kv(KvFile::parse_file(path));
  }
};

// Closed-form parameter counts (biases included unless stated).

inline long fsr_param_count(const ModelConfig& c) {
  const long conv2 = static_cast<long>(c.sr_conv2_out) * c.num_labels + c.sr_conv2_out;
  const long conv3 = static_cast<long>(c.sr_conv3_out) * c.sr_conv2_out + c.sr_conv3_out;
  const long conv4 = static_cast<long>(c.conv4_out()) * c.feature_h * c.feature_w + c.conv4_out();
  const long fc = static_cast<long>(c.num_labels) * c.conv4_out() + c.num_labels;
  return conv2 + conv3 + conv4 + fc;
}

inline long att_param_count(const ModelConfig& c) {
  const long c1 = static_cast<long>(c.att_hidden) * c.feature_d + c.att_hidden;
  const long c2 = static_cast<long>(c.att_hidden) * c.att_hidden * 9 + c.att_hidden;
  const long c3 = static_cast<long>(c.num_labels) * c.att_hidden + c.num_labels;
  return c1 + c2 + c3;
}

inline long conv1_param_count(const ModelConfig& c) {
  return static_cast<long>(c.num_labels) * c.feature_d + c.num_labels;
}

/// Parameters of the rejected one-shot alternative: a single conv layer of
/// conv4_out() full-extent kernels reading all label channels at once
/// (weights only, matching how the comparison is usually quoted).
inline long naive_single_layer_count(const ModelConfig& c) {
  return static_cast<long>(c.conv4_out()) * c.feature_h * c.feature_w * c.num_labels;
}

/// Everything the regularization pathway adds on top of the main net.
inline long srn_additional_param_count(const ModelConfig& c) {
  return att_param_count(c) + conv1_param_count(c) + fsr_param_count(c);
}

namespace graph_names {
constexpr const char* kImage = "image";
constexpr const char* kFeatures = "features";
constexpr const char* kTargets = "targets";
constexpr const char* kMask = "mask";
constexpr const char* kX = "X";
constexpr const char* kYCls = "y_cls";
constexpr const char* kZ = "Z";
constexpr const char* kA = "A";
constexpr const char* kS = "S";
constexpr const char* kU = "U";
constexpr const char* kYAtt = "y_att";
constexpr const char* kYSr = "y_sr";
constexpr const char* kYHat = "y_hat";
constexpr const char* kConv4 = "conv4_relu";
constexpr const char* kLossCls = "loss_cls";
constexpr const char* kLossAtt = "loss_att";
constexpr const char* kLossSr = "loss_sr";
constexpr const char* kLossJoint = "loss_joint";
}  // namespace graph_names

namespace param_groups {
constexpr const char* kBackbone = "backbone";
constexpr const char* kCls = "cls";
constexpr const char* kAtt = "att";
constexpr const char* kConv1 = "conv1";
constexpr const char* kSr = "sr";
}  // namespace param_groups

namespace detail {

inline int build_conv_block(Graph& g, int x, const std::string& name, const std::string& group,
                            const ConvSpec& spec) {
  const int w = g.param(name + ".w", group, spec.weight_shape());
  const int b = spec.bias ? g.param(name + ".b", group, {spec.out_channels}) : -1;
  return g.conv2d(x, w, b, spec);
}

/// Everything downstream of the feature map X: classifier head, attention
/// estimator, confidence map, weighted attention, regularization net, the
/// aggregated logits, and the four training losses.
inline void build_tail(Graph& g, const ModelConfig& cfg, int x_node) {
  namespace gn = graph_names;
  namespace pg = param_groups;
  const int c = cfg.num_labels;
  g.mark_output(gn::kX, x_node);

  const int targets = g.input(gn::kTargets, {c});
  const int mask = g.input(gn::kMask, {c});

  // Main-net classifier: spatial average, then one linear map per label.
  const int pooled = g.global_avg_pool(x_node);
  const int cls_w = g.param("cls.fc.w", pg::kCls, {c, cfg.feature_d});
  const int cls_b = g.param("cls.fc.b", pg::kCls, {c});
  const int y_cls = g.linear(pooled, cls_w, cls_b);
  g.mark_output(gn::kYCls, y_cls);

  // Attention estimator: 1x1, 3x3 (padding preserves the grid), 1x1.
  ConvSpec att1 = conv_spec_1x1(cfg.feature_d, cfg.att_hidden);
  ConvSpec att2;
  att2.in_channels = cfg.att_hidden;
  att2.out_channels = cfg.att_hidden;
  att2.kernel_h = att2.kernel_w = 3;
  att2.pad_h = att2.pad_w = 1;
  ConvSpec att3 = conv_spec_1x1(cfg.att_hidden, c);
  int a = g.relu(build_conv_block(g, x_node, "att.c1", pg::kAtt, att1));
  a = g.relu(build_conv_block(g, a, "att.c2", pg::kAtt, att2));
  const int z = build_conv_block(g, a, "att.c3", pg::kAtt, att3);
  g.mark_output(gn::kZ, z);
  const int att_map = g.spatial_softmax(z);
  g.mark_output(gn::kA, att_map);

  // Per-location label confidences (the per-label linear classifiers
  // applied everywhere as a 1x1 convolution).
  const int s = build_conv_block(g, x_node, "conv1", pg::kConv1,
                                 conv_spec_1x1(cfg.feature_d, c));
  g.mark_output(gn::kS, s);

  // Pooled attention confidences: sum-pool(S * A).
  const int y_att = g.spatial_sum_pool(g.multiply(s, att_map));
  g.mark_output(gn::kYAtt, y_att);

  // Confidence-weighted attention.
  const int u = g.multiply(g.sigmoid(s), att_map);
  g.mark_output(gn::kU, u);

  // Regularization net: two 1x1 layers for label relations, one grouped
  // full-extent layer for spatial patterns, then a fully-connected readout.
  int r = g.relu(build_conv_block(g, u, "sr.c2", pg::kSr, conv_spec_1x1(c, cfg.sr_conv2_out)));
  r = g.relu(build_conv_block(g, r, "sr.c3", pg::kSr,
                              conv_spec_1x1(cfg.sr_conv2_out, cfg.sr_conv3_out)));
  ConvSpec sr4;
  sr4.in_channels = cfg.sr_conv3_out;
  sr4.out_channels = cfg.conv4_out();
  sr4.kernel_h = cfg.feature_h;
  sr4.kernel_w = cfg.feature_w;
  sr4.groups = cfg.sr_conv3_out;  // single-channel kernels, one group per feature channel
  const int conv4 = g.relu(build_conv_block(g, r, "sr.c4", pg::kSr, sr4));
  g.mark_output(gn::kConv4, conv4);
  const int flat = g.flatten(conv4);
  const int sr_w = g.param("sr.fc.w", pg::kSr, {c, cfg.conv4_out()});
  const int sr_b = g.param("sr.fc.b", pg::kSr, {c});
  const int y_sr = g.linear(flat, sr_w, sr_b);
  g.mark_output(gn::kYSr, y_sr);

  const int y_hat = g.affine_combine(y_cls, y_sr, cfg.alpha);
  g.mark_output(gn::kYHat, y_hat);

  const int loss_cls = g.bce_loss(y_cls, targets, mask);
  const int loss_att = g.bce_loss(y_att, targets, mask);
  const int loss_sr = g.bce_loss(y_sr, targets, mask);
  const int loss_joint = g.add(g.bce_loss(y_hat, targets, mask), loss_att);
  g.mark_output(gn::kLossCls, loss_cls);
  g.mark_output(gn::kLossAtt, loss_att);
  g.mark_output(gn::kLossSr, loss_sr);
  g.mark_output(gn::kLossJoint, loss_joint);
  g.set_loss(loss_joint);
}

}  // namespace detail

/// Full graph: image -> backbone -> X -> heads and losses.
inline Graph build_image_graph(const ModelConfig& cfg) {
  cfg.validate();
  Graph g;
  const int image = g.input(graph_names::kImage, {cfg.image_h, cfg.image_w, cfg.image_c});
  const int pools = cfg.downsample_steps();
  int x = image;
  int in_c = cfg.image_c;
  for (std::size_t i = 0; i < cfg.backbone_widths.size(); ++i) {
    ConvSpec spec;
    spec.in_channels = in_c;
    spec.out_channels = cfg.backbone_widths[i];
    spec.kernel_h = spec.kernel_w = 3;
    spec.pad_h = spec.pad_w = 1;
    x = g.relu(detail::build_conv_block(g, x, "backbone.b" + std::to_string(i),
                                        param_groups::kBackbone, spec));
    if (static_cast<int>(i) < pools) x = g.avg_pool2(x);
    in_c = cfg.backbone_widths[i];
  }
  detail::build_tail(g, cfg, x);
  return g;
}

/// Backbone-free graph whose first input is the feature map X itself.
inline Graph build_feature_graph(const ModelConfig& cfg) {
  cfg.validate();
  Graph g;
  const int x = g.input(graph_names::kFeatures, {cfg.feature_h, cfg.feature_w, cfg.feature_d});
  detail::build_tail(g, cfg, x);
  return g;
}

/// Training stages. Each stage trains a subset of parameter groups against
/// one loss head; everything else is frozen.
struct StagePlan {
  struct Stage {
    int number;
    std::vector<std::string> trainable_groups;
    std::string loss_output;
  };
  std::vector<Stage> stages;

  static StagePlan standard() {
    namespace pg = param_groups;
    namespace gn = graph_names;
    StagePlan p;
    p.stages = {
        {1, {pg::kBackbone, pg::kCls}, gn::kLossCls},
        {2, {pg::kAtt, pg::kConv1}, gn::kLossAtt},
        {3, {pg::kSr}, gn::kLossSr},
        {4, {pg::kBackbone, pg::kCls, pg::kAtt, pg::kConv1, pg::kSr}, gn::kLossJoint},
    };
    return p;
  }

  const Stage& stage(int number) const {
    for (const auto& s : stages)
      if (s.number == number) return s;
    throw ConfigError("StagePlan: no stage " + std::to_string(number));
  }
};

/// A configured network: graph + parameters + executor.
template <typename Scalar>
class SrnModel {
 public:
  explicit SrnModel(const ModelConfig& cfg, std::uint64_t init_seed = 0)
      : cfg_(cfg), graph_(build_image_graph(cfg)) {
    graph_.declare_params(store_);
    init_params(store_, init_seed);
    exec_ = std::make_unique<GraphExec<Scalar>>(graph_, store_);
  }

  SrnModel(const SrnModel&) = delete;
  SrnModel& operator=(const SrnModel&) = delete;

  const ModelConfig& config() const { return cfg_; }
  Graph& graph() { return graph_; }
  const Graph& graph() const { return graph_; }
  ParamStore<Scalar>& store() { return store_; }
  const ParamStore<Scalar>& store() const { return store_; }
  GraphExec<Scalar>& exec() { return *exec_; }

  /// Forward pass for one sample. Targets/mask default to zeros/ones so the
  /// loss outputs are well defined even when only predictions are wanted.
  void forward(const Tensor<Scalar>& image, const Tensor<Scalar>* targets = nullptr,
               const Tensor<Scalar>* mask = nullptr) {
    const Tensor<Scalar> zero_t = Tensor<Scalar>::zeros({cfg_.num_labels});
    const Tensor<Scalar> ones_m = Tensor<Scalar>::ones({cfg_.num_labels});
    exec_->forward({&image, targets ? targets : &zero_t, mask ? mask : &ones_m});
  }

  const Tensor<Scalar>& value(const std::string& output) const { return exec_->value(output); }

  int stage_loaded() const { return stage_loaded_; }
  void set_stage_loaded(int s) { stage_loaded_ = s; }

 private:
  ModelConfig cfg_;
  Graph graph_;
  ParamStore<Scalar> store_;
  std::unique_ptr<GraphExec<Scalar>> exec_;
  int stage_loaded_ = 0;
};

// ---------------------------------------------------------------------------
// Checkpoints: magic, version, stage, config echo, then named parameter
// blobs as little-endian 32-bit reals with explicit shapes.
// ---------------------------------------------------------------------------

constexpr char kCheckpointMagic[9] = "SRNCKPT1";

template <typename Scalar>
void save_checkpoint(std::ostream& os, const ModelConfig& cfg, const ParamStore<Scalar>& store,
                     int stage) {
  write_magic(os, kCheckpointMagic);
  write_u32(os, 1);  // version
  write_u32(os, static_cast<std::uint32_t>(stage));
  write_str(os, cfg.to_text());
  write_u32(os, static_cast<std::uint32_t>(store.entries().size()));
  for (const auto& e : store.entries()) {
    write_str(os, e.name);
    write_str(os, e.group);
    write_u32(os, static_cast<std::uint32_t>(e.value.rank()));
    for (int d : e.value.shape()) write_u32(os, static_cast<std::uint32_t>(d));
    for (int i = 0; i < e.value.size(); ++i) write_f32(os, static_cast<float>(e.value[i]));
  }
}

template <typename Scalar>
void save_checkpoint_file(const std::string& path, const ModelConfig& cfg,
                          const ParamStore<Scalar>& store, int stage) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write checkpoint: " + path);
  save_checkpoint(os, cfg, store, stage);
  if (!os) throw DataError("checkpoint write failed: " + path);
}

template <typename Scalar>
std::unique_ptr<SrnModel<Scalar>> load_checkpoint(std::istream& is, const std::string& what) {
  expect_magic(is, kCheckpointMagic, what);
  const std::uint32_t version = read_u32(is);
  if (version != 1) throw DataError(what + ": unsupported checkpoint version " +
                                    std::to_string(version));
  const int stage = static_cast<int>(read_u32(is));
  const ModelConfig cfg = ModelConfig::from_text(read_str(is));
  auto model = std::make_unique<SrnModel<Scalar>>(cfg, 0);
  const std::uint32_t n = read_u32(is);
  if (n != model->store().entries().size())
    throw DataError(what + ": checkpoint has " + std::to_string(n) + " params, model expects " +
                    std::to_string(model->store().entries().size()));
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::string name = read_str(is);
    const std::string group = read_str(is);
    const std::uint32_t rank = read_u32(is);
    std::vector<int> shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(static_cast<int>(read_u32(is)));
    auto& e = model->store().at(name);
    if (e.group != group || e.value.shape() != shape)
      throw DataError(what + ": parameter " + name + " shape/group mismatch");
    for (int k = 0; k < e.value.size(); ++k) e.value[k] = static_cast<Scalar>(read_f32(is));
  }
  model->set_stage_loaded(stage);
  return model;
}

template <typename Scalar>
std::unique_ptr<SrnModel<Scalar>> load_checkpoint_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path);
  return load_checkpoint<Scalar>(is, path);
}

}  // namespace srn

#endif  // SRN_MODEL_HPP_
