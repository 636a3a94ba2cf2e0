#ifndef SRN_METRICS_HPP_
#define SRN_METRICS_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "srn/tensor.hpp"

namespace srn {

/// Scores, binary targets, and optional per-entry validity for N images over
/// C labels. Masked-out entries take no part in any metric.
struct PredictionSet {
  int n = 0;
  int c = 0;
  std::vector<double> scores;         // n*c, row-major
  std::vector<std::uint8_t> targets;  // n*c, values 0/1
  std::vector<std::uint8_t> mask;     // n*c, 0 = excluded; empty = all valid

  void validate() const;

  double score(int i, int l) const { return scores[static_cast<std::size_t>(i) * c + l]; }
  bool target(int i, int l) const { return targets[static_cast<std::size_t>(i) * c + l] != 0; }
  bool valid(int i, int l) const {
    return mask.empty() || mask[static_cast<std::size_t>(i) * c + l] != 0;
  }
};

/// One evaluation protocol: either plain thresholding of every score, or
/// per-image top-k with an optional confidence filter.
struct Protocol {
  std::string name;
  bool topk = false;
  int k = 3;
  std::optional<double> filter_threshold;

  static Protocol all();
  static Protocol top(int k);
  static Protocol top_filtered(int k, double threshold);
};

/// "all" | "top-N" | "top-N-filtered" (filter value supplied separately).
Protocol parse_protocol(const std::string& text, double filter_threshold);

struct ClassAp {
  double ap = 0.0;
  int positives = 0;
  bool included = false;  // false when the class has no positive example
};

struct ProtocolMetrics {
  std::string protocol;
  double p_c = 0.0, r_c = 0.0, f1_c = 0.0;  // macro (per-class averaged)
  double p_o = 0.0, r_o = 0.0, f1_o = 0.0;  // micro (pooled counts)
};

struct MetricsReport {
  double map = 0.0;
  std::vector<ClassAp> per_class;
  std::vector<ProtocolMetrics> protocols;
};

/// prediction = 1 iff score > threshold (strict). Masked entries stay 0.
std::vector<std::uint8_t> binarize_all(const PredictionSet& preds, double threshold = 0.5);

/// Per image, the k highest-scoring valid labels are positive; ties at the
/// cut go to the lower label index. With a filter, chosen labels scoring
/// below it are dropped again.
std::vector<std::uint8_t> binarize_topk(const PredictionSet& preds, int k,
                                        std::optional<double> filter_threshold = std::nullopt);

/// Un-interpolated average precision of one class column: mean over positives
/// of the precision at their rank, scores descending, ties by ascending
/// sample index. Pairs with mask 0 are skipped.
ClassAp per_class_ap(const std::vector<double>& scores, const std::vector<std::uint8_t>& targets,
                     const std::vector<std::uint8_t>& mask = {});

/// Macro and micro precision/recall/F1 of a binarized prediction matrix.
/// All 0/0 ratios are 0.
ProtocolMetrics macro_micro(const std::vector<std::uint8_t>& pred, const PredictionSet& preds);

MetricsReport evaluate(const PredictionSet& preds, const std::vector<Protocol>& protocols);

/// Text table: header "id s0..s{C-1} t0..t{C-1} [m0..m{C-1}]", one row per
/// image. Written with exact decimals so round-trips are lossless.
void write_prediction_file(std::ostream& os, const PredictionSet& preds,
                           const std::vector<std::string>& ids = {});
PredictionSet read_prediction_file(std::istream& is, const std::string& what);
PredictionSet read_prediction_file(const std::string& path);

std::string metrics_report_json(const MetricsReport& report);

}  // namespace srn

#endif  // SRN_METRICS_HPP_
