#ifndef SRN_GRAD_CHECK_HPP_
#define SRN_GRAD_CHECK_HPP_

#include <map>
#include <string>
#include <vector>

#include "srn/graph.hpp"

namespace srn {

struct CheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  int worst_index = -1;
  long coords_checked = 0;
  double tolerance = 0.0;
  bool passed = false;
};

/// Central finite-difference oracle for the reverse-mode gradients of the
/// graph's designated scalar loss.
///
/// Relative error per coordinate: |analytic - numeric| / max(|analytic|,
/// |numeric|, 1e-8). Frozen parameter groups are skipped. When
/// max_coords_per_param > 0, coordinates are sampled with an even stride
/// instead of sweeping every element.
template <typename Scalar>
CheckReport grad_check(const Graph& graph, const std::vector<Tensor<Scalar>>& inputs,
                       ParamStore<Scalar>& params, double step, double tolerance,
                       int max_coords_per_param = 0) {
  if (step <= 0.0) throw ConfigError("grad_check: step must be positive");
  if (graph.loss_node() < 0 || graph.node(graph.loss_node()).shape != std::vector<int>{1})
    throw ShapeError("grad_check: graph has no designated scalar loss");
  constexpr double kFloor = 1e-8;

  GraphExec<Scalar> exec(graph, params);
  std::vector<const Tensor<Scalar>*> ptrs;
  for (const auto& t : inputs) ptrs.push_back(&t);

  exec.forward(ptrs);
  params.zero_grads();
  exec.backward(graph.loss_node());

  // Snapshot analytic gradients before perturbation sweeps reuse the store.
  std::map<std::string, Tensor<double>> analytic;
  for (const auto& e : params.entries())
    if (!params.frozen(e)) analytic[e.name] = e.grad.template cast<double>();

  auto loss_at = [&]() -> double {
    exec.forward(ptrs);
    return static_cast<double>(exec.value(graph.loss_node())[0]);
  };

  CheckReport report;
  report.tolerance = tolerance;
  for (auto& e : params.entries()) {
    if (params.frozen(e)) continue;
    const int n = e.value.size();
    int stride = 1;
    if (max_coords_per_param > 0 && n > max_coords_per_param)
      stride = (n + max_coords_per_param - 1) / max_coords_per_param;
    for (int i = 0; i < n; i += stride) {
      const Scalar saved = e.value[i];
      e.value[i] = static_cast<Scalar>(static_cast<double>(saved) + step);
      const double plus = loss_at();
      e.value[i] = static_cast<Scalar>(static_cast<double>(saved) - step);
      const double minus = loss_at();
      e.value[i] = saved;
      const double numeric = (plus - minus) / (2.0 * step);
      const double a = analytic[e.name][i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), kFloor});
      ++report.coords_checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = e.name;
        report.worst_index = i;
      }
    }
  }
  // Restore the analytic gradients for callers that inspect them afterwards.
  exec.forward(ptrs);
  params.zero_grads();
  exec.backward(graph.loss_node());

  report.passed = report.max_rel_err <= tolerance;
  return report;
}

}  // namespace srn

#endif  // SRN_GRAD_CHECK_HPP_
