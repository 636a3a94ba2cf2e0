#include "srn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace srn {

double pearson(const std::vector<double>& xs, const std::vector<double>& ys, bool* degenerate) {
  if (xs.size() != ys.size()) throw DataError("pearson: series length mismatch");
  if (degenerate) *degenerate = false;
  const std::size_t n = xs.size();
  if (n < 2) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  return sxy / std::sqrt(sxx * syy);
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& xs) {
  const std::size_t n = xs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return xs[a] < xs[b];
  });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t r = i; r <= j; ++r) ranks[order[r]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw DataError("spearman: series length mismatch");
  return pearson(average_ranks(xs), average_ranks(ys));
}

CorrelationTable correlation_table(const std::vector<std::vector<double>>& activations,
                                   const std::vector<std::vector<std::array<float, 2>>>& centers,
                                   const std::vector<std::vector<std::uint8_t>>& present,
                                   int min_count) {
  const std::size_t n = activations.size();
  if (centers.size() != n || present.size() != n)
    throw DataError("correlation_table: sample count mismatch");
  if (n == 0) throw DataError("correlation_table: no samples");
  const int num_neurons = static_cast<int>(activations[0].size());
  const int num_labels = static_cast<int>(present[0].size());

  CorrelationTable table;
  table.num_neurons = num_neurons;
  table.num_labels = num_labels;
  table.min_count = min_count;

  // per-label index lists once, reused by every neuron
  std::vector<std::vector<std::size_t>> label_samples(static_cast<std::size_t>(num_labels));
  for (std::size_t i = 0; i < n; ++i)
    for (int l = 0; l < num_labels; ++l)
      if (present[i][static_cast<std::size_t>(l)]) label_samples[static_cast<std::size_t>(l)].push_back(i);

  std::vector<double> act_series, loc_series;
  for (int k = 0; k < num_neurons; ++k) {
    for (int l = 0; l < num_labels; ++l) {
      const auto& idx = label_samples[static_cast<std::size_t>(l)];
      for (int axis = 0; axis < 2; ++axis) {
        CorrEntry e;
        e.neuron = k;
        e.label = l;
        e.axis = axis;
        e.count = static_cast<int>(idx.size());
        e.unreliable = e.count < min_count;
        act_series.clear();
        loc_series.clear();
        for (std::size_t i : idx) {
          act_series.push_back(activations[i][static_cast<std::size_t>(k)]);
          loc_series.push_back(static_cast<double>(centers[i][static_cast<std::size_t>(l)][axis]));
        }
        e.r = pearson(act_series, loc_series, &e.degenerate);
        table.entries.push_back(e);
      }
    }
  }
  return table;
}

TopSamples top_activating_samples(const std::vector<std::vector<double>>& activations, int neuron,
                                  int k) {
  if (k < 1) throw ConfigError("top_activating_samples: k must be >= 1");
  const int n = static_cast<int>(activations.size());
  if (n == 0) throw DataError("top_activating_samples: no samples");
  if (neuron < 0 || neuron >= static_cast<int>(activations[0].size()))
    throw ConfigError("top_activating_samples: neuron index out of range");
  TopSamples result;
  result.neuron = neuron;
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return activations[static_cast<std::size_t>(a)][static_cast<std::size_t>(neuron)] >
           activations[static_cast<std::size_t>(b)][static_cast<std::size_t>(neuron)];
  });
  result.truncated = k > n;
  const int take = std::min(k, n);
  for (int r = 0; r < take; ++r)
    result.top.push_back({order[static_cast<std::size_t>(r)],
                          activations[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])]
                                     [static_cast<std::size_t>(neuron)]});
  return result;
}

ApGainTable ap_gain_vs_concurrency(const MetricsReport& srn, const MetricsReport& baseline,
                                   const Dataset& data, const std::string& split) {
  const int c = data.num_labels;
  if (static_cast<int>(srn.per_class.size()) != c ||
      static_cast<int>(baseline.per_class.size()) != c)
    throw DataError("ap_gain: report class count does not match dataset");
  const int begin = data.split_begin(split), count = data.split_count(split);

  ApGainTable table;
  for (int l = 0; l < c; ++l) {
    long images_with = 0, concurrent_sum = 0;
    for (int i = 0; i < count; ++i) {
      const Sample& s = data.samples[static_cast<std::size_t>(begin + i)];
      if (!s.targets[static_cast<std::size_t>(l)]) continue;
      ++images_with;
      concurrent_sum += std::count(s.targets.begin(), s.targets.end(), std::uint8_t{1});
    }
    const bool evaluable = images_with > 0 && srn.per_class[static_cast<std::size_t>(l)].included &&
                           baseline.per_class[static_cast<std::size_t>(l)].included;
    if (!evaluable) {
      table.excluded_labels.push_back(l);
      continue;
    }
    ApGainRow row;
    row.label = l;
    row.delta_ap = srn.per_class[static_cast<std::size_t>(l)].ap -
                   baseline.per_class[static_cast<std::size_t>(l)].ap;
    row.mean_concurrency = static_cast<double>(concurrent_sum) / images_with;
    table.rows.push_back(row);
  }
  std::stable_sort(table.rows.begin(), table.rows.end(),
                   [](const ApGainRow& a, const ApGainRow& b) { return a.delta_ap > b.delta_ap; });
  if (table.rows.size() >= 2) {
    std::vector<double> gains, conc;
    for (const auto& r : table.rows) {
      gains.push_back(r.delta_ap);
      conc.push_back(r.mean_concurrency);
    }
    table.rank_correlation = spearman(gains, conc);
  }
  return table;
}

std::string correlation_table_text(const CorrelationTable& table, bool reliable_only) {
  std::ostringstream os;
  os << "neuron  label  axis  r  count  flags\n";
  for (const auto& e : table.entries) {
    if (reliable_only && e.unreliable) continue;
    os << e.neuron << "  " << e.label << "  " << (e.axis == 0 ? "y" : "x") << "  " << e.r << "  "
       << e.count << "  "
       << (e.degenerate ? "degenerate" : (e.unreliable ? "unreliable" : "-")) << "\n";
  }
  return os.str();
}

std::string correlation_table_json(const CorrelationTable& table) {
  nlohmann::json j;
  j["num_neurons"] = table.num_neurons;
  j["num_labels"] = table.num_labels;
  j["min_count"] = table.min_count;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : table.entries) {
    entries.push_back({{"neuron", e.neuron},
                       {"label", e.label},
                       {"axis", e.axis == 0 ? "y" : "x"},
                       {"r", e.r},
                       {"count", e.count},
                       {"unreliable", e.unreliable},
                       {"degenerate", e.degenerate}});
  }
  j["entries"] = entries;
  return j.dump(2) + "\n";
}

std::string top_samples_text(const std::vector<TopSamples>& tables) {
  std::ostringstream os;
  os << "neuron  rank  sample  activation\n";
  for (const auto& t : tables) {
    for (std::size_t r = 0; r < t.top.size(); ++r)
      os << t.neuron << "  " << r + 1 << "  " << t.top[r].sample << "  " << t.top[r].value << "\n";
    if (t.truncated) os << "# neuron " << t.neuron << ": k exceeded split size, truncated\n";
  }
  return os.str();
}

std::string top_samples_json(const std::vector<TopSamples>& tables) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& t : tables) {
    nlohmann::json top = nlohmann::json::array();
    for (const auto& a : t.top) top.push_back({{"sample", a.sample}, {"activation", a.value}});
    j.push_back({{"neuron", t.neuron}, {"top", top}, {"truncated", t.truncated}});
  }
  return j.dump(2) + "\n";
}

std::string ap_gain_text(const ApGainTable& table) {
  std::ostringstream os;
  os << "label  delta_ap  mean_concurrency\n";
  for (const auto& r : table.rows)
    os << r.label << "  " << r.delta_ap << "  " << r.mean_concurrency << "\n";
  if (!table.excluded_labels.empty()) {
    os << "# excluded labels:";
    for (int l : table.excluded_labels) os << " " << l;
    os << "\n";
  }
  os << "# rank correlation (delta_ap vs concurrency): " << table.rank_correlation << "\n";
  return os.str();
}

std::string ap_gain_json(const ApGainTable& table) {
  nlohmann::json j;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : table.rows)
    rows.push_back({{"label", r.label},
                    {"delta_ap", r.delta_ap},
                    {"mean_concurrency", r.mean_concurrency}});
  j["rows"] = rows;
  j["excluded_labels"] = table.excluded_labels;
  j["rank_correlation"] = table.rank_correlation;
  return j.dump(2) + "\n";
}

}  // namespace srn
