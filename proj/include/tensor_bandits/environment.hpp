#pragma once

#include "tensor_bandits/random.hpp"
#include "tensor_bandits/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tb {

/// A stochastic tensor bandit: rewards are truth(arm) + N(0, noise_std^2).
/// When context_dim > 0 the first context_dim coordinates of every arm are
/// drawn by the environment.
struct Environment {
    DenseTensor truth;
    double noise_std = 1.0;
    Index context_dim = 0;
    std::uint64_t seed = 0;
    /// Generating decomposition, when the truth is synthetic.
    std::optional<Tucker> generator;
    /// Replay list of contexts; empty means uniform i.i.d. contexts.
    std::vector<Context> context_replay;

    const Dims& dims() const { return truth.dims(); }
    Index order() const { return truth.order(); }
};

/// Order-3 p x p x p environment of Tucker rank (r, r, r) with a diagonal
/// core of value w * p^1.5 and Gaussian-QR factors.
Environment synth_env(Index p, Index r, double w, double noise_std, Index context_dim,
                      std::uint64_t seed);

/// Generalization to arbitrary dims/ranks; the diagonal core value is
/// w * sqrt(prod p), which reduces to w * p^1.5 for three equal modes.
Environment synth_env(const Dims& dims, const Dims& ranks, double w, double noise_std,
                      Index context_dim, std::uint64_t seed);

Environment load_env(const std::filesystem::path& path, double noise_std, Index context_dim);

void save_tensor(const std::filesystem::path& path, const DenseTensor& x);
DenseTensor load_tensor(const std::filesystem::path& path);

/// Context replay file: one line per step with 1-based whitespace-separated indices.
std::vector<Context> load_context_replay(const std::filesystem::path& path, const Dims& dims,
                                         Index context_dim);

double pull(const Environment& env, const Arm& arm, Rng& rng);

/// Uniform over the context box.
Context draw_context(const Environment& env, Rng& rng);

/// Uniform draw, or the step-th replay entry (cycling) when a replay list is set.
Context next_context(const Environment& env, Index step, Rng& rng);

struct OracleChoice {
    Arm arm;
    double value = 0.0;
};

/// Argmax of a tensor, optionally within the slice fixed by a context.
/// Ties go to the lowest flat offset.
OracleChoice best_entry(const DenseTensor& x, const std::optional<Context>& context = std::nullopt);

OracleChoice oracle(const Environment& env, const std::optional<Context>& context = std::nullopt);

struct RegretTrace {
    std::vector<double> instantaneous;
    std::vector<double> cumulative;

    Index size() const { return instantaneous.size(); }
    double total() const { return cumulative.empty() ? 0.0 : cumulative.back(); }
};

/// Appends the noiseless gap between the (context-conditioned) best entry
/// and the pulled arm.
RegretTrace& record_regret(RegretTrace& trace, const Environment& env,
                           const std::optional<Context>& context, const Arm& arm);

}  // namespace tb
