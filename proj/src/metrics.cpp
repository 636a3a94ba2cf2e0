#include "srn/metrics.hpp"

#include <algorithm>
#include <istream>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "srn/image.hpp"
#include "srn/kv.hpp"

namespace srn {

void PredictionSet::validate() const {
  if (n < 0 || c <= 0) throw DataError("PredictionSet: bad extents");
  const std::size_t want = static_cast<std::size_t>(n) * c;
  if (scores.size() != want || targets.size() != want)
    throw DataError("PredictionSet: scores/targets size mismatch");
  if (!mask.empty() && mask.size() != want)
    throw DataError("PredictionSet: mask size mismatch");
  for (std::uint8_t t : targets)
    if (t > 1) throw DataError("PredictionSet: non-binary target");
}

Protocol Protocol::all() {
  Protocol p;
  p.name = "all";
  return p;
}
Protocol Protocol::top(int k) {
  Protocol p;
  p.name = "top-" + std::to_string(k);
  p.topk = true;
  p.k = k;
  return p;
}
Protocol Protocol::top_filtered(int k, double threshold) {
  Protocol p = top(k);
  p.name += "-filtered";
  p.filter_threshold = threshold;
  return p;
}

Protocol parse_protocol(const std::string& text, double filter_threshold) {
  if (text == "all") return Protocol::all();
  if (text.rfind("top-", 0) == 0) {
    std::string rest = text.substr(4);
    bool filtered = false;
    const std::string suffix = "-filtered";
    if (rest.size() > suffix.size() && rest.compare(rest.size() - suffix.size(), suffix.size(), suffix) == 0) {
      filtered = true;
      rest = rest.substr(0, rest.size() - suffix.size());
    }
    int k = 0;
    try {
      std::size_t used = 0;
      k = std::stoi(rest, &used);
      if (used != rest.size()) throw std::invalid_argument(rest);
    } catch (const std::exception&) {
      throw ConfigError("bad protocol '" + text + "'");
    }
    if (k < 1) throw ConfigError("protocol '" + text + "': k must be >= 1");
    return filtered ? Protocol::top_filtered(k, filter_threshold) : Protocol::top(k);
  }
  throw ConfigError("unknown protocol '" + text + "' (expected all, top-N, top-N-filtered)");
}

std::vector<std::uint8_t> binarize_all(const PredictionSet& preds, double threshold) {
  preds.validate();
  std::vector<std::uint8_t> out(preds.scores.size(), 0);
  for (int i = 0; i < preds.n; ++i)
    for (int l = 0; l < preds.c; ++l)
      if (preds.valid(i, l) && preds.score(i, l) > threshold)
        out[static_cast<std::size_t>(i) * preds.c + l] = 1;
  return out;
}

std::vector<std::uint8_t> binarize_topk(const PredictionSet& preds, int k,
                                        std::optional<double> filter_threshold) {
  preds.validate();
  if (k < 1) throw ConfigError("binarize_topk: k must be >= 1");
  std::vector<std::uint8_t> out(preds.scores.size(), 0);
  std::vector<int> labels;
  for (int i = 0; i < preds.n; ++i) {
    labels.clear();
    for (int l = 0; l < preds.c; ++l)
      if (preds.valid(i, l)) labels.push_back(l);
    // Descending score; the lower index wins ties, so a plain stable sort
    // over ascending labels does the right thing.
    std::stable_sort(labels.begin(), labels.end(), [&](int a, int b) {
      return preds.score(i, a) > preds.score(i, b);
    });
    const int take = std::min<int>(k, static_cast<int>(labels.size()));
    for (int r = 0; r < take; ++r) {
      const int l = labels[static_cast<std::size_t>(r)];
      if (filter_threshold && preds.score(i, l) < *filter_threshold) continue;
      out[static_cast<std::size_t>(i) * preds.c + l] = 1;
    }
  }
  return out;
}

ClassAp per_class_ap(const std::vector<double>& scores, const std::vector<std::uint8_t>& targets,
                     const std::vector<std::uint8_t>& mask) {
  if (scores.size() != targets.size() || (!mask.empty() && mask.size() != scores.size()))
    throw DataError("per_class_ap: column size mismatch");
  std::vector<int> order;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (mask.empty() || mask[i] != 0) order.push_back(static_cast<int>(i));
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)]; });
  ClassAp result;
  int seen_pos = 0;
  double sum_prec = 0.0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (targets[static_cast<std::size_t>(order[r])] != 0) {
      ++seen_pos;
      sum_prec += static_cast<double>(seen_pos) / static_cast<double>(r + 1);
    }
  }
  result.positives = seen_pos;
  result.included = seen_pos > 0;
  result.ap = seen_pos > 0 ? sum_prec / seen_pos : 0.0;
  return result;
}

namespace {

double ratio(long num, long den) { return den == 0 ? 0.0 : static_cast<double>(num) / den; }
double f1(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

}  // namespace

ProtocolMetrics macro_micro(const std::vector<std::uint8_t>& pred, const PredictionSet& preds) {
  preds.validate();
  if (pred.size() != preds.scores.size()) throw DataError("macro_micro: prediction size mismatch");
  long tp_all = 0, pred_all = 0, pos_all = 0;
  double p_sum = 0.0, r_sum = 0.0, f_sum = 0.0;
  for (int l = 0; l < preds.c; ++l) {
    long tp = 0, npred = 0, npos = 0;
    for (int i = 0; i < preds.n; ++i) {
      if (!preds.valid(i, l)) continue;
      const bool p = pred[static_cast<std::size_t>(i) * preds.c + l] != 0;
      const bool t = preds.target(i, l);
      tp += p && t;
      npred += p;
      npos += t;
    }
    const double cp = ratio(tp, npred), cr = ratio(tp, npos);
    p_sum += cp;
    r_sum += cr;
    f_sum += f1(cp, cr);
    tp_all += tp;
    pred_all += npred;
    pos_all += npos;
  }
  ProtocolMetrics m;
  m.p_c = p_sum / preds.c;
  m.r_c = r_sum / preds.c;
  m.f1_c = f_sum / preds.c;
  m.p_o = ratio(tp_all, pred_all);
  m.r_o = ratio(tp_all, pos_all);
  m.f1_o = f1(m.p_o, m.r_o);
  return m;
}

MetricsReport evaluate(const PredictionSet& preds, const std::vector<Protocol>& protocols) {
  preds.validate();
  MetricsReport report;
  // mAP comes from raw scores and is protocol independent.
  double ap_sum = 0.0;
  int included = 0;
  for (int l = 0; l < preds.c; ++l) {
    std::vector<double> col(static_cast<std::size_t>(preds.n));
    std::vector<std::uint8_t> tg(static_cast<std::size_t>(preds.n));
    std::vector<std::uint8_t> mk(static_cast<std::size_t>(preds.n), 1);
    for (int i = 0; i < preds.n; ++i) {
      col[static_cast<std::size_t>(i)] = preds.score(i, l);
      tg[static_cast<std::size_t>(i)] = preds.target(i, l) ? 1 : 0;
      mk[static_cast<std::size_t>(i)] = preds.valid(i, l) ? 1 : 0;
    }
    const ClassAp ap = per_class_ap(col, tg, mk);
    report.per_class.push_back(ap);
    if (ap.included) {
      ap_sum += ap.ap;
      ++included;
    }
  }
  report.map = included > 0 ? ap_sum / included : 0.0;

  for (const Protocol& proto : protocols) {
    const std::vector<std::uint8_t> pred =
        proto.topk ? binarize_topk(preds, proto.k, proto.filter_threshold) : binarize_all(preds);
    ProtocolMetrics m = macro_micro(pred, preds);
    m.protocol = proto.name;
    report.protocols.push_back(std::move(m));
  }
  return report;
}

void write_prediction_file(std::ostream& os, const PredictionSet& preds,
                           const std::vector<std::string>& ids) {
  preds.validate();
  if (!ids.empty() && static_cast<int>(ids.size()) != preds.n)
    throw DataError("write_prediction_file: id count mismatch");
  os << "id";
  for (int l = 0; l < preds.c; ++l) os << " s" << l;
  for (int l = 0; l < preds.c; ++l) os << " t" << l;
  if (!preds.mask.empty())
    for (int l = 0; l < preds.c; ++l) os << " m" << l;
  os << "\n";
  for (int i = 0; i < preds.n; ++i) {
    os << (ids.empty() ? std::to_string(i) : ids[static_cast<std::size_t>(i)]);
    for (int l = 0; l < preds.c; ++l) os << " " << exact_decimal(preds.score(i, l));
    for (int l = 0; l < preds.c; ++l) os << " " << (preds.target(i, l) ? 1 : 0);
    if (!preds.mask.empty())
      for (int l = 0; l < preds.c; ++l) os << " " << (preds.valid(i, l) ? 1 : 0);
    os << "\n";
  }
}

PredictionSet read_prediction_file(std::istream& is, const std::string& what) {
  std::string header;
  if (!std::getline(is, header)) throw DataError(what + ": empty prediction file");
  std::istringstream hs(header);
  std::string tok;
  if (!(hs >> tok) || tok != "id") throw DataError(what + ": header must start with 'id'");
  int n_s = 0, n_t = 0, n_m = 0;
  while (hs >> tok) {
    if (tok.rfind("s", 0) == 0) ++n_s;
    else if (tok.rfind("t", 0) == 0) ++n_t;
    else if (tok.rfind("m", 0) == 0) ++n_m;
    else throw DataError(what + ": unexpected header column '" + tok + "'");
  }
  if (n_s == 0 || n_s != n_t || (n_m != 0 && n_m != n_s))
    throw DataError(what + ": header needs C score, C target, and optionally C mask columns");

  PredictionSet p;
  p.c = n_s;
  std::string line;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::istringstream ls(line);
    std::string id;
    if (!(ls >> id)) throw DataError(what + ":" + std::to_string(lineno) + ": bad row");
    auto fail = [&]() -> DataError {
      return DataError(what + ":" + std::to_string(lineno) + ": truncated or malformed row");
    };
    for (int l = 0; l < n_s; ++l) {
      double v;
      if (!(ls >> v)) throw fail();
      p.scores.push_back(v);
    }
    for (int l = 0; l < n_t; ++l) {
      int v;
      if (!(ls >> v) || (v != 0 && v != 1)) throw fail();
      p.targets.push_back(static_cast<std::uint8_t>(v));
    }
    for (int l = 0; l < n_m; ++l) {
      int v;
      if (!(ls >> v) || (v != 0 && v != 1)) throw fail();
      p.mask.push_back(static_cast<std::uint8_t>(v));
    }
    std::string extra;
    if (ls >> extra) throw DataError(what + ":" + std::to_string(lineno) + ": trailing tokens");
    ++p.n;
  }
  p.validate();
  return p;
}

PredictionSet read_prediction_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open prediction file: " + path);
  return read_prediction_file(is, path);
}

std::string metrics_report_json(const MetricsReport& report) {
  nlohmann::json j;
  j["mAP"] = report.map;
  nlohmann::json per_class = nlohmann::json::array();
  for (const auto& ap : report.per_class) {
    per_class.push_back({{"ap", ap.ap}, {"positives", ap.positives}, {"included", ap.included}});
  }
  j["per_class"] = per_class;
  nlohmann::json protos = nlohmann::json::array();
  for (const auto& m : report.protocols) {
    protos.push_back({{"protocol", m.protocol},
                      {"P-C", m.p_c},
                      {"R-C", m.r_c},
                      {"F1-C", m.f1_c},
                      {"P-O", m.p_o},
                      {"R-O", m.r_o},
                      {"F1-O", m.f1_o}});
  }
  j["protocols"] = protos;
  return j.dump(2) + "\n";
}

}  // namespace srn
