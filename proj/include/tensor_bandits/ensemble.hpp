#pragma once

// Tensor ensemble sampling.  M Tucker models are drawn from a Gaussian row
// prior; each keeps its own perturbed copy of the reward history and is
// fitted by MAP alternating least squares (closed-form row updates, then a
// least-squares core update).  Every step one model is drawn uniformly and
// the arm it rates highest is pulled.

#include "tensor_bandits/completion.hpp"
#include "tensor_bandits/random.hpp"

#include <optional>
#include <vector>

namespace tb {

struct EnsemblePrior {
    /// Prior means, one p_k x r_k matrix per mode (row i is mu_{k,i}).
    std::vector<MatrixXd> mu;
    /// Prior standard deviation per mode.
    std::vector<double> sigma_k;
    /// Reward noise standard deviation.
    double sigma = 1.0;
    /// Perturbation standard deviation.
    double sigma_tilde = 1.0;
    Index ensemble_size = 100;

    /// Zero means and unit prior scale.
    static EnsemblePrior standard(const Dims& dims, const Dims& ranks, Index ensemble_size,
                                  double sigma_tilde, double sigma = 1.0, double sigma_k = 1.0);
};

struct FitOptions {
    /// Sweeps the first time a model is fitted.
    Index initial_sweeps = 5;
    /// Sweeps on every later refit.
    Index sweeps_per_step = 1;
    /// Stop early once a sweep lowers the objective by no more than this.
    double tolerance = 1e-10;
    /// Ridge on the core solve, for conditioning only.
    double core_ridge = 1e-8;
};

/// Perturbed MAP objective of one model:
/// sigma^-2 sum_s (y_s - x(arm_s))^2 + sum_k sigma_k^-2 sum_i |U_k[i] - prior_k[i]|^2.
double map_objective(const Tucker& model, const Observations& history,
                     const std::vector<MatrixXd>& prior_rows, const EnsemblePrior& prior);

/// Entry of the model at one arm: core contracted with one row per factor.
double model_entry(const Tucker& model, const Arm& arm);

/// Closed-form minimizer of the objective over row `row` of factor `mode`:
/// [sigma^-2 sum v v^T + sigma_k^-2 I]^-1 [sigma^-2 sum y v + sigma_k^-2 prior_row].
VectorXd als_row_update(const Tucker& model, const Observations& history, Index mode, Index row,
                        const EnsemblePrior& prior, const VectorXd& prior_row);

/// Least-squares core for fixed factors.
DenseTensor core_update(const Tucker& model, const Observations& history, double ridge);

struct FitTrace {
    /// Objective before fitting and after every row/core update.
    std::vector<double> objective;
    Index sweeps = 0;
};

/// Alternating sweeps from `model`; the objective never increases.
Tucker map_fit(Tucker model, const Observations& history, const std::vector<MatrixXd>& prior_rows,
               const EnsemblePrior& prior, Index sweeps, const FitOptions& opts,
               FitTrace* trace = nullptr);

class TensorEnsemble {
public:
    TensorEnsemble(EnsemblePrior prior, Dims dims, Dims ranks, Index context_dim, std::uint64_t seed,
                   FitOptions fit = {});

    Index ensemble_size() const noexcept { return models_.size(); }
    Index sample_model(Rng& rng) const;

    /// Refits model m on its perturbed history (warm-started).
    const Tucker& fit(Index m);
    /// Argmax of model m's reconstruction over the decision slice; does not refit.
    Arm act(Index m, const std::optional<Context>& context = std::nullopt) const;
    /// Draws one model, refits it and acts on it.
    Arm step(Rng& rng, const std::optional<Context>& context = std::nullopt);

    /// Appends (arm, y) to the shared history and (arm, y + omega_m) to every model.
    void perturb_and_record(const Arm& arm, double reward, Rng& rng);

    const Observations& shared_history() const noexcept { return shared_; }
    Observations perturbed_history(Index m) const;
    const Tucker& model(Index m) const { return models_.at(m).current; }
    const std::vector<MatrixXd>& prior_rows(Index m) const { return models_.at(m).prior_rows; }
    const EnsemblePrior& prior() const noexcept { return prior_; }
    Index last_sampled() const noexcept { return last_sampled_; }

private:
    struct Member {
        Tucker current;
        std::vector<MatrixXd> prior_rows;
        std::vector<double> perturbation;
        bool fitted = false;
    };

    EnsemblePrior prior_;
    Dims dims_;
    Dims ranks_;
    Index context_dim_ = 0;
    FitOptions fit_;
    std::vector<Member> models_;
    Observations shared_;
    Index last_sampled_ = 0;
};

}  // namespace tb
