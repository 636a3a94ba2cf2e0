#ifndef SRN_ANALYSIS_HPP_
#define SRN_ANALYSIS_HPP_

#include <string>
#include <vector>

#include "srn/data.hpp"
#include "srn/image.hpp"
#include "srn/metrics.hpp"
#include "srn/model.hpp"

namespace srn {

/// Pearson correlation coefficient. Returns 0 and sets *degenerate when a
/// series is constant (or fewer than two points).
double pearson(const std::vector<double>& xs, const std::vector<double>& ys,
               bool* degenerate = nullptr);

/// Spearman rank correlation (average ranks on ties).
double spearman(const std::vector<double>& xs, const std::vector<double>& ys);

struct CorrEntry {
  int neuron = 0;
  int label = 0;
  int axis = 0;  // 0 = y, 1 = x
  double r = 0.0;
  int count = 0;
  bool unreliable = false;  // count below the reliability floor
  bool degenerate = false;  // constant series
};

struct CorrelationTable {
  int num_neurons = 0;
  int num_labels = 0;
  int min_count = 30;
  std::vector<CorrEntry> entries;  // neuron-major, then label, then axis

  const CorrEntry& at(int neuron, int label, int axis) const {
    return entries[static_cast<std::size_t>((neuron * num_labels + label) * 2 + axis)];
  }
};

/// Pure form: activations[i][k] is neuron k's response on sample i; centers
/// and present flags come from the dataset. Correlations use label-present
/// samples only.
CorrelationTable correlation_table(const std::vector<std::vector<double>>& activations,
                                   const std::vector<std::vector<std::array<float, 2>>>& centers,
                                   const std::vector<std::vector<std::uint8_t>>& present,
                                   int min_count = 30);

struct Activation {
  int sample = 0;  // index within the split
  double value = 0.0;
};

struct TopSamples {
  int neuron = 0;
  std::vector<Activation> top;  // descending value, ties by ascending index
  bool truncated = false;       // k exceeded the split size
};

TopSamples top_activating_samples(const std::vector<std::vector<double>>& activations, int neuron,
                                  int k);

struct ApGainRow {
  int label = 0;
  double delta_ap = 0.0;
  double mean_concurrency = 0.0;
};

struct ApGainTable {
  std::vector<ApGainRow> rows;       // sorted by delta_ap descending
  std::vector<int> excluded_labels;  // absent from the split or not evaluable
  double rank_correlation = 0.0;     // Spearman(delta_ap, concurrency), reported only
};

/// Per-class AP difference between two reports against the mean number of
/// co-present labels among split images containing the class.
ApGainTable ap_gain_vs_concurrency(const MetricsReport& srn, const MetricsReport& baseline,
                                   const Dataset& data, const std::string& split = "test");

/// Post-ReLU responses of the full-extent grouped layer (spatially 1x1, one
/// scalar per kernel) on every sample of a split, evaluation path.
template <typename Scalar>
std::vector<std::vector<double>> collect_neuron_activations(SrnModel<Scalar>& model,
                                                            const Dataset& data,
                                                            const std::string& split) {
  const int begin = data.split_begin(split), count = data.split_count(split);
  std::vector<std::vector<double>> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const Sample& s = data.samples[static_cast<std::size_t>(begin + i)];
    const Tensor<Scalar> img = bilinear_resize(s.image.template cast<Scalar>(),
                                               model.config().image_h, model.config().image_w);
    model.forward(img);
    const Tensor<Scalar>& act = model.value(graph_names::kConv4);
    std::vector<double> row(static_cast<std::size_t>(act.size()));
    for (int k = 0; k < act.size(); ++k) row[static_cast<std::size_t>(k)] = static_cast<double>(act[k]);
    out.push_back(std::move(row));
  }
  return out;
}

template <typename Scalar>
CorrelationTable neuron_location_correlation(SrnModel<Scalar>& model, const Dataset& data,
                                             const std::string& split = "test",
                                             int min_count = 30) {
  const auto activations = collect_neuron_activations(model, data, split);
  const int begin = data.split_begin(split), count = data.split_count(split);
  std::vector<std::vector<std::array<float, 2>>> centers;
  std::vector<std::vector<std::uint8_t>> present;
  for (int i = 0; i < count; ++i) {
    const Sample& s = data.samples[static_cast<std::size_t>(begin + i)];
    centers.push_back(s.centers);
    present.push_back(s.targets);
  }
  return correlation_table(activations, centers, present, min_count);
}

std::string correlation_table_text(const CorrelationTable& table, bool reliable_only = true);
std::string correlation_table_json(const CorrelationTable& table);
std::string top_samples_text(const std::vector<TopSamples>& tables);
std::string top_samples_json(const std::vector<TopSamples>& tables);
std::string ap_gain_text(const ApGainTable& table);
std::string ap_gain_json(const ApGainTable& table);

}  // namespace srn

#endif  // SRN_ANALYSIS_HPP_
