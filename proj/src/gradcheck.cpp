#include "pecas/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pecas/errors.hpp"
#include "pecas/rng.hpp"

namespace pecas {

double gradcheck_relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / scale;
}

namespace {

std::vector<std::size_t> pick_entries(std::size_t n, std::size_t limit, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (limit == 0 || limit >= n) return idx;
  // Partial Fisher-Yates from the front.
  for (std::size_t i = 0; i < limit; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

GradcheckReport finite_difference_gradcheck(const Fragment& fragment, const Tensor& input,
                                            const GradcheckOptions& options) {
  if (!(options.epsilon > 0.0)) throw ArgumentError("gradcheck: epsilon must be positive");
  const FragmentGradient analytic = fragment.gradient(input, fragment.params);
  if (analytic.param_grads.size() != fragment.params.size()) {
    throw DimensionError("gradcheck: fragment returned " + std::to_string(analytic.param_grads.size()) +
                         " parameter gradients for " + std::to_string(fragment.params.size()) + " parameters");
  }
  require_shape(analytic.input_grad, input.shape(), "gradcheck input gradient");
  for (std::size_t p = 0; p < fragment.params.size(); ++p) {
    require_shape(analytic.param_grads[p], fragment.params[p].shape(), "gradcheck parameter gradient");
  }

  const auto base_region = fragment.evaluate(input, fragment.params).region;
  Rng rng(options.seed);
  GradcheckReport report;
  const double eps = options.epsilon;

  Tensor x = input;
  std::vector<Tensor> params = fragment.params;

  auto check_entry = [&](double& slot, double analytic_value, const std::string& where) {
    const double original = slot;
    slot = original + eps;
    const Probe plus = fragment.evaluate(x, params);
    slot = original - eps;
    const Probe minus = fragment.evaluate(x, params);
    slot = original;
    if (plus.region != base_region || minus.region != base_region) {
      ++report.skipped_kinks;
      return;
    }
    const double numeric = (plus.value - minus.value) / (2.0 * eps);
    const double err = gradcheck_relative_error(analytic_value, numeric);
    ++report.checked;
    if (err >= report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_entry = where;
    }
  };

  for (std::size_t p = 0; p < params.size(); ++p) {
    for (auto i : pick_entries(params[p].size(), options.entries_per_tensor, rng)) {
      check_entry(params[p][i], analytic.param_grads[p][i], "param " + std::to_string(p) + " [" + std::to_string(i) + "]");
    }
  }
  for (auto i : pick_entries(x.size(), options.entries_per_tensor, rng)) {
    check_entry(x[i], analytic.input_grad[i], "input [" + std::to_string(i) + "]");
  }
  return report;
}

}  // namespace pecas
