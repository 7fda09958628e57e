#pragma once

// Experiment driver: flat key=value configuration, replicated seeded runs of
// one policy against one environment, sequential grid tuning, and trace
// aggregation with Welch comparisons.

#include "tensor_bandits/environment.hpp"
#include "tensor_bandits/errors.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tb {

struct ExperimentConfig {
    // environment
    Index p = 15;
    Index r = 2;
    Index order = 3;
    double w = 0.5;
    Dims dims;   ///< overrides p/order when set
    Dims ranks;  ///< overrides r when set
    double noise_std = 1.0;
    Index context_dim = 0;
    std::string tensor;          ///< tensor file instead of a synthetic truth
    std::string context_replay;  ///< replay file of contexts
    std::uint64_t seed = 1;

    // run
    Index horizon = 1000;
    Index replications = 1;
    Index threads = 1;
    Index checkpoint_stride = 10;
    bool full_trace = false;
    std::string output = "out";
    std::string policy = "vectorized_ucb";

    // epoch-greedy and elimination
    double init_constant = 1.0;
    double c2 = 20.0;
    double c0 = 0.003;
    double xi_multiplier = 0.01;
    double lambda1 = 0.1;
    std::optional<double> lambda2;
    std::optional<double> delta;
    std::optional<Index> n1;
    double completion_tolerance = 1e-6;
    Index completion_max_iterations = 50;

    // ensemble
    Index ensemble_size = 100;
    double sigma_tilde2 = 0.01;
    double reward_sigma = 1.0;
    double prior_sigma = 1.0;
    Index initial_sweeps = 5;
    Index sweeps_per_step = 1;

    // vectorized UCB
    double alpha = 1.0;

    Dims resolved_dims() const;
    Dims resolved_ranks() const;
};

/// Names of every accepted key (aliases included).
std::vector<std::string> config_keys();

/// Sets one key; throws ConfigError naming the key on unknown keys (with a
/// closest-match suggestion), type errors and domain violations.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Cross-field checks; throws ConfigError.
void validate(const ExperimentConfig& cfg);

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config(const std::filesystem::path& path);

/// TB_SEED, when set, replaces the configured seed.
void apply_env_overrides(ExperimentConfig& cfg);

/// Canonical key=value listing of a configuration.
std::vector<std::pair<std::string, std::string>> describe(const ExperimentConfig& cfg);

/// One bandit policy behind the uniform interaction loop.
class Policy {
public:
    virtual ~Policy() = default;
    virtual Arm choose(Rng& rng, const std::optional<Context>& context) = 0;
    virtual void observe(const Arm& arm, double reward, Rng& rng) = 0;
    /// Label of the phase the last chosen arm belongs to.
    virtual std::string phase() const = 0;
};

std::unique_ptr<Policy> make_policy(const ExperimentConfig& cfg, const Environment& env, Index replication);

Environment make_environment(const ExperimentConfig& cfg, Index replication);

struct ReplicationResult {
    RegretTrace regret;
    std::vector<Arm> arms;
    std::vector<std::string> phases;
};

ReplicationResult run_replication(const ExperimentConfig& cfg, Index replication);

struct RunSummary {
    std::string policy;
    Index horizon = 0;
    std::vector<Index> checkpoints;
    std::vector<double> mean;
    std::vector<double> std;
    std::vector<double> final_regrets;
    double wall_clock = 0.0;
};

/// Checkpoint steps (1-based): every stride-th step plus the last.
std::vector<Index> checkpoint_steps(Index horizon, Index stride);

RunSummary summarize(const std::string& policy, const std::vector<ReplicationResult>& results, Index stride);

/// Runs every replication (in parallel when cfg.threads > 1); results come
/// back in replication order.
std::vector<ReplicationResult> run_replications(const ExperimentConfig& cfg);

void write_trace(std::ostream& out, const ExperimentConfig& cfg, const std::vector<ReplicationResult>& results);
void write_summary(std::ostream& out, const ExperimentConfig& cfg, const RunSummary& summary);

/// Runs and, when `out_dir` is given, writes trace.csv and summary.json there.
RunSummary run_experiment(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& out_dir);

struct GridAxis {
    std::string key;
    std::vector<std::string> values;
};

/// Lines "key = v1, v2, ..."; '#' starts a comment.
std::vector<GridAxis> parse_grid_text(const std::string& text);
std::vector<GridAxis> parse_grid(const std::filesystem::path& path);

struct GridPoint {
    std::string key;
    std::string value;
    double mean_final_regret = 0.0;
};

struct GridResult {
    ExperimentConfig best;
    std::vector<std::pair<std::string, std::string>> chosen;
    std::vector<GridPoint> table;
};

/// Tunes the axes one at a time in order, fixing each at its argmin (first
/// value wins ties) before moving on.  Every grid point reuses the same seeds.
GridResult grid_search(const ExperimentConfig& cfg, const std::vector<GridAxis>& grid);

struct TraceSet {
    std::string name;
    std::string policy;
    Index horizon = 0;
    std::vector<Index> steps;
    /// per replication, cumulative regret at each of `steps`
    std::vector<std::vector<double>> cumulative;

    std::vector<double> final_regrets() const;
};

TraceSet read_trace(std::istream& in, const std::string& name);
TraceSet read_trace(const std::filesystem::path& path_or_dir);

struct Comparison {
    std::string baseline;
    std::string candidate;
    double t = 0.0;
    double df = 0.0;
    double p_value = 1.0;
    double reduction_percent = 0.0;
};

struct AggregateReport {
    std::vector<RunSummary> summaries;
    std::vector<std::string> names;
    std::vector<Comparison> comparisons;
};

/// Pairwise Welch comparisons of final regrets; throws on mismatched horizons.
AggregateReport aggregate(const std::vector<TraceSet>& sets);
void write_report(std::ostream& out, const AggregateReport& report);

}  // namespace tb
