#pragma once

// Epoch-greedy for tensor bandits.  After s1 uniform initialization pulls,
// epoch k runs s_{2k} greedy pulls against the current low-rank estimate
// followed by a single uniform exploration pull.  Only the uniform pulls are
// kept for estimation.

#include "tensor_bandits/completion.hpp"
#include "tensor_bandits/random.hpp"

#include <optional>

namespace tb {

enum class EpochPhase { Initialize, Explore, Exploit };

const char* to_string(EpochPhase phase);

/// s1 = ceil(C0 * r^((d-2)/2) * p^(d/2)), at least 2.
Index initialization_length(Index p, Index r, Index d, double c0 = 1.0);

/// s_{2k} = ceil(C2 * p^(-(d+1)/2) * r^(-1/2) * (log p)^(-1/2) * (k + s1)^(1/2)), at least 1.
Index exploit_length(Index k, Index s1, double c2, Index p, Index r, Index d);

struct EpochGreedyConfig {
    Dims dims;
    Dims ranks;
    /// First context_dim modes are chosen by the environment.
    Index context_dim = 0;
    double init_constant = 1.0;
    double c2 = 20.0;
    CompletionOptions completion;
};

struct EpochStep {
    Arm arm;
    EpochPhase phase;
};

class EpochGreedy {
public:
    explicit EpochGreedy(EpochGreedyConfig config);

    EpochStep next_arm(Rng& rng, const std::optional<Context>& context = std::nullopt);
    void update(const Arm& arm, double reward, EpochPhase phase);

    Index s1() const noexcept { return s1_; }
    Index steps() const noexcept { return steps_; }
    Index epoch_index() const noexcept { return epoch_; }
    Index steps_left_in_exploit() const noexcept { return exploit_left_; }
    const Observations& history() const noexcept { return history_; }
    const std::optional<Tucker>& current_estimate() const noexcept { return estimate_; }
    Index completions() const noexcept { return completions_; }
    const EpochGreedyConfig& config() const noexcept { return config_; }

    /// Phase the next call to next_arm will use.
    EpochPhase upcoming_phase() const noexcept;

private:
    Arm random_arm(Rng& rng, const std::optional<Context>& context) const;
    void refresh_estimate();

    EpochGreedyConfig config_;
    Index s1_ = 0;
    Index p_ = 0;
    Index r_ = 0;
    Index steps_ = 0;
    Index epoch_ = 0;
    Index exploit_left_ = 0;
    Observations history_;
    std::optional<Tucker> estimate_;
    std::optional<DenseTensor> reconstruction_;
    bool stale_ = true;
    Index completions_ = 0;
};

}  // namespace tb
