#pragma once

// Noisy low-rank tensor completion from uniformly sampled entries:
// spectral initialization (rescaled sample tensor plus per-mode U-statistic
// eigenvectors) followed by alternating projected-SVD refinement.

#include "tensor_bandits/tensor.hpp"

#include <vector>

namespace tb {

struct Observation {
    Arm arm;
    double reward = 0.0;
};

using Observations = std::vector<Observation>;

struct CompletionOptions {
    Dims ranks;
    double tolerance = 1e-6;
    Index max_iterations = 50;
};

struct SpectralInit {
    DenseTensor x_ini;
    std::vector<MatrixXd> factors;
};

struct PowerIteration {
    std::vector<MatrixXd> factors;
    /// Projected Frobenius norm before the first sweep and after every sweep.
    std::vector<double> projected_norms;
    Index sweeps = 0;
};

/// (prod p / T) * sum_t y_t * e(arm_t)
DenseTensor unbiased_estimate(const Observations& obs, const Dims& dims);

/// Mode-`mode` second-moment U-statistic, computed as c * (B B^T - D) where
/// B is the mode unfolding of sum_t y_t e(arm_t) and D removes the t == t'
/// diagonal; c = (prod p)^2 / (T (T - 1)).
MatrixXd u_statistic(const Observations& obs, const Dims& dims, Index mode);

SpectralInit spectral_initialize(const Observations& obs, const Dims& dims,
                                 const CompletionOptions& opts);

PowerIteration power_iterate(const DenseTensor& x_ini, const std::vector<MatrixXd>& factors0,
                             const CompletionOptions& opts);

/// Full pipeline; the core is x_ini projected on the final factors.
Tucker complete(const Observations& obs, const Dims& dims, const CompletionOptions& opts);

/// Checks shapes and ranges shared by every entry point above.
void validate_observations(const Observations& obs, const Dims& dims, const CompletionOptions& opts);

}  // namespace tb
