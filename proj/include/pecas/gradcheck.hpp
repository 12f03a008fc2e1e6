#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pecas/tensor.hpp"

namespace pecas {

/// Scalar output of a fragment plus an optional description of the linear
/// region it was evaluated in (ReLU masks, pooling winners). Two probes with
/// different regions straddle a kink.
struct Probe {
  double value = 0.0;
  std::vector<std::size_t> region;
};

struct FragmentGradient {
  Tensor input_grad;
  std::vector<Tensor> param_grads;
};

/// A scalar-valued function of (input, params) with an analytic gradient.
struct Fragment {
  std::vector<Tensor> params;
  std::function<Probe(const Tensor& input, std::span<const Tensor> params)> evaluate;
  std::function<FragmentGradient(const Tensor& input, std::span<const Tensor> params)> gradient;
};

struct GradcheckOptions {
  double epsilon = 1e-4;
  /// Entries sampled per tensor; 0 checks every entry.
  std::size_t entries_per_tensor = 0;
  std::uint64_t seed = 0;
};

struct GradcheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
  std::string worst_entry;  // e.g. "param 2 [17]" or "input [5]"
};

/// max over entries of |a - n| / max(|a|, |n|, 1e-8), with n the central
/// difference (f(x+e) - f(x-e)) / 2e. Entries whose perturbation changes the
/// probe region are skipped and counted.
GradcheckReport finite_difference_gradcheck(const Fragment& fragment, const Tensor& input,
                                            const GradcheckOptions& options = {});

double gradcheck_relative_error(double analytic, double numeric);

}  // namespace pecas
