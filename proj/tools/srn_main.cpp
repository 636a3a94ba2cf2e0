// srn: generate planted-relation datasets, train/evaluate the spatially
// regularized classifier, export attention maps, and run model analyses.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "srn/analysis.hpp"
#include "srn/image.hpp"
#include "srn/metrics.hpp"
#include "srn/model.hpp"
#include "srn/synth.hpp"
#include "srn/trainer.hpp"

namespace {

namespace fs = std::filesystem;
using Scalar = float;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitCompute = 4;

void apply_thread_env() {
  if (const char* env = std::getenv("SRN_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) Eigen::setNbThreads(n);
    } catch (const std::exception&) {
      throw srn::ConfigError("SRN_THREADS must be a positive integer");
    }
  }
}

fs::path ensure_out_dir(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw srn::DataError("cannot create output directory " + out + ": " + ec.message());
  return dir;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw srn::DataError("cannot write " + path.string());
  os << text;
  if (!os) throw srn::DataError("write failed: " + path.string());
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> out;
  for (const auto& part : srn::split(text, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw srn::ConfigError(std::string(what) + ": bad integer '" + part + "'");
    }
  }
  if (out.empty()) throw srn::ConfigError(std::string(what) + ": empty list");
  return out;
}

std::string head_for(const srn::SrnModel<Scalar>& model, const std::string& head_flag) {
  if (head_flag != "auto") return head_flag;
  // Until the regularization path has been trained the aggregate would mix in
  // random logits, so earlier checkpoints are scored by the main net alone.
  return model.stage_loaded() >= 3 ? srn::graph_names::kYHat : srn::graph_names::kYCls;
}

srn::PredictionSet score_split(srn::SrnModel<Scalar>& model, const srn::Dataset& data,
                               const std::string& split, const std::string& head) {
  if (data.num_labels != model.config().num_labels)
    throw srn::DataError("dataset has " + std::to_string(data.num_labels) +
                         " labels, checkpoint expects " +
                         std::to_string(model.config().num_labels));
  const int begin = data.split_begin(split), count = data.split_count(split);
  srn::PredictionSet p;
  p.n = count;
  p.c = data.num_labels;
  for (int i = 0; i < count; ++i) {
    const srn::Sample& s = data.samples[static_cast<std::size_t>(begin + i)];
    const srn::Tensor<Scalar> img = srn::plain_resize(
        s.image.cast<Scalar>(), model.config().image_h, model.config().image_w);
    model.forward(img);
    const auto& logits = model.value(head);
    for (int l = 0; l < p.c; ++l)
      p.scores.push_back(srn::sigmoid_scalar(static_cast<double>(logits[l])));
    p.targets.insert(p.targets.end(), s.targets.begin(), s.targets.end());
  }
  p.validate();
  return p;
}

int cmd_generate(const std::string& config, int n, int n_train, int n_val, int n_test,
                 std::optional<std::uint64_t> seed, const std::string& out) {
  srn::WorldSpec world = srn::WorldSpec::parse_file(config);
  if (seed) world.seed = *seed;
  const fs::path dir = ensure_out_dir(out);
  std::vector<std::string> warnings;
  srn::Dataset data = (n_train || n_val || n_test)
                          ? srn::generate(world, n_train, n_val, n_test, &warnings)
                          : srn::generate(world, n, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  srn::save_dataset_file((dir / "dataset.bin").string(), data);
  write_text_file(dir / "world.txt", world.to_text());
  const srn::WorldReport report = srn::validate_world(world);
  write_text_file(dir / "world_report.txt", srn::world_report_text(world, report));
  write_text_file(dir / "world_report.json", srn::world_report_json(world, report));
  std::cout << "wrote " << data.total() << " samples (" << data.n_train << "/" << data.n_val
            << "/" << data.n_test << ") to " << (dir / "dataset.bin").string() << "\n";
  if (!report.ok) std::cerr << "warning: probe statistics deviate from the spec; see report\n";
  return 0;
}

int cmd_train(const std::string& dataset, const std::string& model_config,
              const std::string& train_config, const std::string& stages,
              const std::string& checkpoint, std::optional<std::uint64_t> seed,
              const std::string& out) {
  const srn::Dataset data = srn::load_dataset_file(dataset);
  srn::TrainConfig tc = train_config.empty() ? srn::TrainConfig{}
                                             : srn::TrainConfig::from_file(train_config);
  if (seed) tc.seed = *seed;
  std::unique_ptr<srn::SrnModel<Scalar>> model;
  if (!checkpoint.empty()) {
    model = srn::load_checkpoint_file<Scalar>(checkpoint);
  } else {
    srn::ModelConfig mc = model_config.empty() ? srn::ModelConfig{}
                                               : srn::ModelConfig::from_file(model_config);
    model = std::make_unique<srn::SrnModel<Scalar>>(mc, tc.seed);
  }
  const std::vector<int> stage_numbers = parse_int_list(stages, "--stages");
  for (int s : stage_numbers)
    if (s < 1 || s > 4) throw srn::ConfigError("--stages: stage numbers are 1..4");

  const fs::path dir = ensure_out_dir(out);
  std::ofstream log(dir / "train_log.txt");
  if (!log) throw srn::DataError("cannot write training log");
  const srn::TrainRunReport report = srn::train_stages(
      *model, data, tc, stage_numbers, (dir / "").string(), &log);
  for (const auto& stage : report.stages) {
    std::cout << "stage " << stage.stage << ": " << stage.epochs.size() << " epochs, final val loss "
              << stage.final_val_loss()
              << (stage.completed_by_plateau ? " (plateaued at lr floor)" : " (epoch cap)") << "\n";
  }
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& dataset, const std::string& split,
             const std::string& protocols, int k, double filter_threshold,
             const std::string& head_flag, const std::string& out) {
  auto model = srn::load_checkpoint_file<Scalar>(checkpoint);
  const srn::Dataset data = srn::load_dataset_file(dataset);
  const std::string head = head_for(*model, head_flag);
  const srn::PredictionSet preds = score_split(*model, data, split, head);

  std::vector<srn::Protocol> protos;
  for (const auto& name : srn::split(protocols, ','))
    protos.push_back(srn::parse_protocol(name, filter_threshold));
  for (auto& p : protos)
    if (p.topk) p.k = k;
  const srn::MetricsReport report = srn::evaluate(preds, protos);

  const fs::path dir = ensure_out_dir(out);
  {
    std::ofstream os(dir / "predictions.txt");
    if (!os) throw srn::DataError("cannot write predictions");
    srn::write_prediction_file(os, preds);
  }
  std::ostringstream ap_table;
  ap_table << "label  ap  positives  included\n";
  for (std::size_t l = 0; l < report.per_class.size(); ++l) {
    const auto& ap = report.per_class[l];
    ap_table << l << "  " << srn::exact_decimal(ap.ap) << "  " << ap.positives << "  "
             << (ap.included ? "yes" : "no") << "\n";
  }
  write_text_file(dir / "per_class_ap.txt", ap_table.str());
  for (std::size_t i = 0; i < protos.size(); ++i) {
    srn::MetricsReport single = report;
    single.protocols = {report.protocols[i]};
    write_text_file(dir / ("report_" + protos[i].name + ".json"),
                    srn::metrics_report_json(single));
  }
  std::cout << "head " << head << ", split " << split << ", mAP "
            << srn::exact_decimal(report.map) << "\n";
  for (const auto& m : report.protocols)
    std::cout << m.protocol << ": P-C " << m.p_c << " R-C " << m.r_c << " F1-C " << m.f1_c
              << " P-O " << m.p_o << " R-O " << m.r_o << " F1-O " << m.f1_o << "\n";
  return 0;
}

int cmd_export_attention(const std::string& checkpoint, const std::string& dataset,
                         const std::string& samples, const std::string& split, bool ascii,
                         const std::string& out) {
  auto model = srn::load_checkpoint_file<Scalar>(checkpoint);
  const srn::Dataset data = srn::load_dataset_file(dataset);
  if (data.num_labels != model->config().num_labels)
    throw srn::DataError("dataset/checkpoint label count mismatch");
  const int begin = data.split_begin(split), count = data.split_count(split);
  const fs::path dir = ensure_out_dir(out);

  const struct {
    const char* tag;
    const char* output;
  } kinds[] = {{"A", srn::graph_names::kA},
               {"S", srn::graph_names::kS},
               {"U", srn::graph_names::kU}};

  for (int id : parse_int_list(samples, "--samples")) {
    if (id < 0 || id >= count)
      throw srn::DataError("sample id " + std::to_string(id) + " outside split of size " +
                           std::to_string(count));
    const srn::Sample& s = data.samples[static_cast<std::size_t>(begin + id)];
    const srn::Tensor<Scalar> img = srn::plain_resize(
        s.image.cast<Scalar>(), model->config().image_h, model->config().image_w);
    model->forward(img);
    for (const auto& kind : kinds) {
      const auto& maps = model->value(kind.output);
      const int h = maps.dim(0), w = maps.dim(1), c = maps.dim(2);
      for (int l = 0; l < c; ++l) {
        srn::Tensor<Scalar> channel({h, w});
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) channel(y, x) = maps(y, x, l);
        const std::string stem =
            "s" + std::to_string(id) + "_" + kind.tag + "_l" + std::to_string(l);
        srn::write_pgm((dir / (stem + ".pgm")).string(), channel, !ascii);
        std::ofstream raw(dir / (stem + ".txt"));
        if (!raw) throw srn::DataError("cannot write raw map");
        srn::write_raw_map(raw, channel);
      }
    }
  }
  std::cout << "exported A/S/U maps to " << dir.string() << "\n";
  return 0;
}

int cmd_analyze(const std::string& which, const std::string& checkpoint,
                const std::string& baseline, const std::string& dataset, const std::string& split,
                int k, const std::string& head_flag, const std::string& out) {
  auto model = srn::load_checkpoint_file<Scalar>(checkpoint);
  const srn::Dataset data = srn::load_dataset_file(dataset);
  const fs::path dir = ensure_out_dir(out);

  if (which == "correlation") {
    const srn::CorrelationTable table = srn::neuron_location_correlation(*model, data, split);
    write_text_file(dir / "correlation.txt", srn::correlation_table_text(table));
    write_text_file(dir / "correlation.json", srn::correlation_table_json(table));
    std::cout << "wrote correlation tables for " << table.num_neurons << " neurons\n";
    return 0;
  }
  if (which == "top-activations") {
    const auto activations = srn::collect_neuron_activations(*model, data, split);
    std::vector<srn::TopSamples> tables;
    const int neurons = static_cast<int>(activations.at(0).size());
    for (int n = 0; n < neurons; ++n)
      tables.push_back(srn::top_activating_samples(activations, n, k));
    for (const auto& t : tables)
      if (t.truncated) {
        std::cerr << "warning: k exceeds split size, lists truncated\n";
        break;
      }
    write_text_file(dir / "top_activations.txt", srn::top_samples_text(tables));
    write_text_file(dir / "top_activations.json", srn::top_samples_json(tables));
    std::cout << "wrote top-" << k << " activations for " << neurons << " neurons\n";
    return 0;
  }
  if (which == "ap-gain") {
    if (baseline.empty()) throw srn::ConfigError("ap-gain needs --baseline <checkpoint>");
    auto base_model = srn::load_checkpoint_file<Scalar>(baseline);
    const srn::PredictionSet p_srn =
        score_split(*model, data, split, head_for(*model, head_flag));
    const srn::PredictionSet p_base =
        score_split(*base_model, data, split, head_for(*base_model, head_flag));
    const srn::MetricsReport r_srn = srn::evaluate(p_srn, {});
    const srn::MetricsReport r_base = srn::evaluate(p_base, {});
    const srn::ApGainTable table = srn::ap_gain_vs_concurrency(r_srn, r_base, data, split);
    write_text_file(dir / "ap_gain.txt", srn::ap_gain_text(table));
    write_text_file(dir / "ap_gain.json", srn::ap_gain_json(table));
    std::cout << "wrote ap-gain table (" << table.rows.size() << " classes, rank correlation "
              << table.rank_correlation << ")\n";
    return 0;
  }
  throw srn::ConfigError("--which must be correlation, top-activations, or ap-gain");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spatially regularized multi-label classifier"};
  app.require_subcommand(1);

  std::string config, dataset, model_config, train_config, checkpoint, baseline, out = ".";
  std::string stages = "1,2,3,4", split = "test", protocols = "all,top-3";
  std::string samples, which, head = "auto";
  int n = 1000, n_train = 0, n_val = 0, n_test = 0, k = 3;
  double filter_threshold = 0.5;
  bool ascii = false;
  std::optional<std::uint64_t> seed;

  auto* gen = app.add_subcommand("generate", "synthesize a planted-relation dataset");
  gen->add_option("--config", config, "world spec file")->required();
  gen->add_option("--n", n, "total sample count (split 70/10/20)");
  gen->add_option("--n-train", n_train, "explicit train split size");
  gen->add_option("--n-val", n_val, "explicit val split size");
  gen->add_option("--n-test", n_test, "explicit test split size");
  gen->add_option("--seed", seed, "override the world seed");
  gen->add_option("--out", out, "output directory");

  auto* train = app.add_subcommand("train", "run the staged training procedure");
  train->add_option("--dataset", dataset, "dataset file")->required();
  train->add_option("--model-config", model_config, "model config file");
  train->add_option("--train-config", train_config, "training config file");
  train->add_option("--stages", stages, "comma list of stages to run");
  train->add_option("--checkpoint", checkpoint, "resume from this checkpoint");
  train->add_option("--seed", seed, "override the training seed");
  train->add_option("--out", out, "output directory");

  auto* eval = app.add_subcommand("eval", "score a checkpoint on a dataset split");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--dataset", dataset, "dataset file")->required();
  eval->add_option("--split", split, "train, val, or test");
  eval->add_option("--protocols", protocols, "comma list: all, top-N, top-N-filtered");
  eval->add_option("--k", k, "k for top-k protocols");
  eval->add_option("--filter-threshold", filter_threshold, "confidence filter for *-filtered");
  eval->add_option("--head", head, "auto, y_cls, y_att, y_sr, or y_hat");
  eval->add_option("--out", out, "output directory");

  auto* exp = app.add_subcommand("export-attention", "write per-label A/S/U maps");
  exp->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  exp->add_option("--dataset", dataset, "dataset file")->required();
  exp->add_option("--samples", samples, "comma list of sample ids within the split")->required();
  exp->add_option("--split", split, "train, val, or test");
  exp->add_flag("--ascii", ascii, "write P2 instead of P5 graymaps");
  exp->add_option("--out", out, "output directory");

  auto* ana = app.add_subcommand("analyze", "model introspection tables");
  ana->add_option("--which", which, "correlation, top-activations, or ap-gain")->required();
  ana->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  ana->add_option("--baseline", baseline, "baseline checkpoint (ap-gain)");
  ana->add_option("--dataset", dataset, "dataset file")->required();
  ana->add_option("--split", split, "train, val, or test");
  ana->add_option("--k", k, "list length for top-activations");
  ana->add_option("--head", head, "scoring head for ap-gain");
  ana->add_option("--out", out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    apply_thread_env();
    if (gen->parsed())
      return cmd_generate(config, n, n_train, n_val, n_test, seed, out);
    if (train->parsed())
      return cmd_train(dataset, model_config, train_config, stages, checkpoint, seed, out);
    if (eval->parsed())
      return cmd_eval(checkpoint, dataset, split, protocols, k, filter_threshold, head, out);
    if (exp->parsed())
      return cmd_export_attention(checkpoint, dataset, samples, split, ascii, out);
    if (ana->parsed())
      return cmd_analyze(which, checkpoint, baseline, dataset, split, k, head, out);
  } catch (const srn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const srn::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCompute;
  }
  return 0;
}
