#include "tensor_bandits/harness.hpp"

#include "tensor_bandits/elimination.hpp"
#include "tensor_bandits/ensemble.hpp"
#include "tensor_bandits/epoch_greedy.hpp"
#include "tensor_bandits/stats.hpp"
#include "tensor_bandits/ucb.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <thread>

namespace tb {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

double to_double(const std::string& key, const std::string& text) {
    double v = 0.0;
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) throw ConfigError(key, "expected a number, got '" + text + "'");
    return v;
}

long long to_integer(const std::string& key, const std::string& text) {
    long long v = 0;
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) throw ConfigError(key, "expected an integer, got '" + text + "'");
    return v;
}

Index to_count(const std::string& key, const std::string& text, Index min) {
    const long long v = to_integer(key, text);
    if (v < static_cast<long long>(min))
        throw ConfigError(key, "must be at least " + std::to_string(min) + ", got " + text);
    return static_cast<Index>(v);
}

double to_positive(const std::string& key, const std::string& text) {
    const double v = to_double(key, text);
    if (!(v > 0)) throw ConfigError(key, "must be positive, got " + text);
    return v;
}

double to_nonnegative(const std::string& key, const std::string& text) {
    const double v = to_double(key, text);
    if (v < 0) throw ConfigError(key, "must be nonnegative, got " + text);
    return v;
}

bool to_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw ConfigError(key, "expected true or false, got '" + text + "'");
}

Dims to_dims(const std::string& key, const std::string& text) {
    Dims out;
    if (trim(text).empty()) return out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        std::istringstream words(item);
        std::string w;
        while (words >> w) out.push_back(to_count(key, w, 1));
    }
    if (out.empty()) throw ConfigError(key, "expected a list of positive integers");
    return out;
}

std::string join(const Dims& d) {
    std::string s;
    for (Index k = 0; k < d.size(); ++k) s += (k ? "," : "") + std::to_string(d[k]);
    return s;
}

struct KeySpec {
    std::string name;
    std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

template <class T>
std::string show_optional(const std::optional<T>& v) {
    if (!v) return "auto";
    if constexpr (std::is_floating_point_v<T>) return format_double(*v);
    else return std::to_string(*v);
}

const std::vector<KeySpec>& key_table() {
    using C = ExperimentConfig;
    using S = const std::string&;
    static const std::vector<KeySpec> table = {
        {"p", [](C& c, S k, S v) { c.p = to_count(k, v, 2); }, [](const C& c) { return std::to_string(c.p); }},
        {"r", [](C& c, S k, S v) { c.r = to_count(k, v, 1); }, [](const C& c) { return std::to_string(c.r); }},
        {"order", [](C& c, S k, S v) { c.order = to_count(k, v, 1); }, [](const C& c) { return std::to_string(c.order); }},
        {"w", [](C& c, S k, S v) { c.w = to_double(k, v); }, [](const C& c) { return format_double(c.w); }},
        {"dims", [](C& c, S k, S v) { c.dims = to_dims(k, v); }, [](const C& c) { return join(c.dims); }},
        {"ranks", [](C& c, S k, S v) { c.ranks = to_dims(k, v); }, [](const C& c) { return join(c.ranks); }},
        {"noise_std", [](C& c, S k, S v) { c.noise_std = to_nonnegative(k, v); },
         [](const C& c) { return format_double(c.noise_std); }},
        {"context_dim", [](C& c, S k, S v) { c.context_dim = to_count(k, v, 0); },
         [](const C& c) { return std::to_string(c.context_dim); }},
        {"tensor", [](C& c, S, S v) { c.tensor = v; }, [](const C& c) { return c.tensor; }},
        {"context_replay", [](C& c, S, S v) { c.context_replay = v; }, [](const C& c) { return c.context_replay; }},
        {"seed", [](C& c, S k, S v) { c.seed = static_cast<std::uint64_t>(to_count(k, v, 0)); },
         [](const C& c) { return std::to_string(c.seed); }},
        {"horizon", [](C& c, S, S v) { c.horizon = to_count("horizon", v, 1); },
         [](const C& c) { return std::to_string(c.horizon); }},
        {"n", [](C& c, S, S v) { c.horizon = to_count("horizon", v, 1); }, nullptr},
        {"replications", [](C& c, S k, S v) { c.replications = to_count(k, v, 1); },
         [](const C& c) { return std::to_string(c.replications); }},
        {"threads", [](C& c, S k, S v) { c.threads = to_count(k, v, 1); }, nullptr},
        {"checkpoint_stride", [](C& c, S k, S v) { c.checkpoint_stride = to_count(k, v, 1); },
         [](const C& c) { return std::to_string(c.checkpoint_stride); }},
        {"full_trace", [](C& c, S k, S v) { c.full_trace = to_bool(k, v); },
         [](const C& c) { return std::string(c.full_trace ? "true" : "false"); }},
        {"output", [](C& c, S, S v) { c.output = v; }, nullptr},
        {"policy",
         [](C& c, S k, S v) {
             static const std::vector<std::string> names = {"epoch_greedy", "elimination", "ensemble", "vectorized_ucb",
                                                            "oracle"};
             if (std::find(names.begin(), names.end(), v) == names.end())
                 throw ConfigError(k, "unknown policy '" + v +
                                          "' (expected epoch_greedy, elimination, ensemble, vectorized_ucb or oracle)");
             c.policy = v;
         },
         [](const C& c) { return c.policy; }},
        {"init_constant", [](C& c, S k, S v) { c.init_constant = to_positive(k, v); },
         [](const C& c) { return format_double(c.init_constant); }},
        {"c2", [](C& c, S k, S v) { c.c2 = to_positive(k, v); }, [](const C& c) { return format_double(c.c2); }},
        {"c0", [](C& c, S k, S v) { c.c0 = to_positive(k, v); }, [](const C& c) { return format_double(c.c0); }},
        {"c", [](C& c, S k, S v) { c.xi_multiplier = to_nonnegative(k, v); },
         [](const C& c) { return format_double(c.xi_multiplier); }},
        {"lambda1", [](C& c, S k, S v) { c.lambda1 = to_positive(k, v); },
         [](const C& c) { return format_double(c.lambda1); }},
        {"lambda2",
         [](C& c, S k, S v) {
             if (v == "auto") c.lambda2.reset();
             else c.lambda2 = to_positive(k, v);
         },
         [](const C& c) { return show_optional(c.lambda2); }},
        {"delta",
         [](C& c, S k, S v) {
             if (v == "auto") {
                 c.delta.reset();
                 return;
             }
             const double d = to_positive(k, v);
             if (d >= 1) throw ConfigError(k, "must lie in (0, 1), got " + v);
             c.delta = d;
         },
         [](const C& c) { return show_optional(c.delta); }},
        {"n1",
         [](C& c, S k, S v) {
             if (v == "auto") c.n1.reset();
             else c.n1 = to_count(k, v, 1);
         },
         [](const C& c) { return show_optional(c.n1); }},
        {"completion_tolerance", [](C& c, S k, S v) { c.completion_tolerance = to_positive(k, v); },
         [](const C& c) { return format_double(c.completion_tolerance); }},
        {"completion_max_iterations", [](C& c, S k, S v) { c.completion_max_iterations = to_count(k, v, 0); },
         [](const C& c) { return std::to_string(c.completion_max_iterations); }},
        {"ensemble_size", [](C& c, S k, S v) { c.ensemble_size = to_count(k, v, 1); },
         [](const C& c) { return std::to_string(c.ensemble_size); }},
        {"sigma_tilde2", [](C& c, S k, S v) { c.sigma_tilde2 = to_nonnegative(k, v); },
         [](const C& c) { return format_double(c.sigma_tilde2); }},
        {"reward_sigma", [](C& c, S k, S v) { c.reward_sigma = to_positive(k, v); },
         [](const C& c) { return format_double(c.reward_sigma); }},
        {"prior_sigma", [](C& c, S k, S v) { c.prior_sigma = to_positive(k, v); },
         [](const C& c) { return format_double(c.prior_sigma); }},
        {"initial_sweeps", [](C& c, S k, S v) { c.initial_sweeps = to_count(k, v, 1); },
         [](const C& c) { return std::to_string(c.initial_sweeps); }},
        {"sweeps_per_step", [](C& c, S k, S v) { c.sweeps_per_step = to_count(k, v, 1); },
         [](const C& c) { return std::to_string(c.sweeps_per_step); }},
        {"alpha", [](C& c, S k, S v) { c.alpha = to_positive(k, v); }, [](const C& c) { return format_double(c.alpha); }},
    };
    return table;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
            diag = up;
        }
    }
    return row[b.size()];
}

std::string arm_label(const Arm& arm) {
    std::string s;
    for (Index k = 0; k < arm.index.size(); ++k) s += (k ? "|" : "") + std::to_string(arm.index[k] + 1);
    return s;
}

// --- policy adapters --------------------------------------------------------

class OraclePolicy final : public Policy {
public:
    explicit OraclePolicy(const Environment& env) : env_(env) {}
    Arm choose(Rng&, const std::optional<Context>& context) override { return oracle(env_, context).arm; }
    void observe(const Arm&, double, Rng&) override {}
    std::string phase() const override { return "oracle"; }

private:
    const Environment& env_;
};

class UcbPolicy final : public Policy {
public:
    UcbPolicy(const Dims& dims, Index context_dim, double alpha) : ucb_(dims, context_dim, alpha) {}
    Arm choose(Rng&, const std::optional<Context>& context) override { return ucb_.next_arm(context); }
    void observe(const Arm& arm, double reward, Rng&) override { ucb_.update(arm, reward); }
    std::string phase() const override { return "ucb"; }

private:
    VectorizedUcb ucb_;
};

class EpochGreedyPolicy final : public Policy {
public:
    explicit EpochGreedyPolicy(EpochGreedyConfig cfg) : policy_(std::move(cfg)) {}
    Arm choose(Rng& rng, const std::optional<Context>& context) override {
        EpochStep s = policy_.next_arm(rng, context);
        phase_ = s.phase;
        return std::move(s.arm);
    }
    void observe(const Arm& arm, double reward, Rng&) override { policy_.update(arm, reward, phase_); }
    std::string phase() const override { return to_string(phase_); }

private:
    EpochGreedy policy_;
    EpochPhase phase_ = EpochPhase::Initialize;
};

class EliminationPolicy final : public Policy {
public:
    explicit EliminationPolicy(EliminationConfig cfg) : policy_(std::move(cfg)) {}
    Arm choose(Rng& rng, const std::optional<Context>&) override {
        EliminationStep s = policy_.next_arm(rng);
        phase_ = s.phase;
        return std::move(s.arm);
    }
    void observe(const Arm& arm, double reward, Rng&) override { policy_.update(arm, reward, phase_); }
    std::string phase() const override { return to_string(phase_); }

private:
    TensorElimination policy_;
    EliminationPhase phase_ = EliminationPhase::Initialize;
};

class EnsemblePolicy final : public Policy {
public:
    EnsemblePolicy(EnsemblePrior prior, const Dims& dims, const Dims& ranks, Index context_dim, std::uint64_t seed,
                   FitOptions fit)
        : ensemble_(std::move(prior), dims, ranks, context_dim, seed, fit) {}
    Arm choose(Rng& rng, const std::optional<Context>& context) override { return ensemble_.step(rng, context); }
    void observe(const Arm& arm, double reward, Rng& rng) override { ensemble_.perturb_and_record(arm, reward, rng); }
    std::string phase() const override { return "model " + std::to_string(ensemble_.last_sampled() + 1); }

private:
    TensorEnsemble ensemble_;
};

template <class F>
void parallel_for(Index count, Index threads, F&& body) {
    std::vector<std::exception_ptr> errors(count);
    std::atomic<Index> next{0};
    auto worker = [&] {
        for (Index i = next++; i < count; i = next++) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const Index n = std::min(std::max<Index>(threads, 1), count);
    if (n <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (Index k = 0; k < n; ++k) pool.emplace_back(worker);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::string read_file(const std::filesystem::path& path, const std::string& key) {
    std::ifstream in(path);
    if (!in) throw ConfigError(key, "cannot open '" + path.string() + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

// --- configuration ------------------------------------------------------------

Dims ExperimentConfig::resolved_dims() const { return dims.empty() ? Dims(order, p) : dims; }

Dims ExperimentConfig::resolved_ranks() const {
    return ranks.empty() ? Dims(resolved_dims().size(), r) : ranks;
}

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& k : key_table()) out.push_back(k.name);
    return out;
}

void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    const auto& table = key_table();
    const auto it = std::find_if(table.begin(), table.end(), [&](const KeySpec& k) { return k.name == key; });
    if (it == table.end()) {
        const auto best = std::min_element(table.begin(), table.end(), [&](const KeySpec& a, const KeySpec& b) {
            return edit_distance(key, a.name) < edit_distance(key, b.name);
        });
        std::string msg = "unknown key";
        if (edit_distance(key, best->name) <= std::max<std::size_t>(2, key.size() / 3))
            msg += " (did you mean '" + best->name + "'?)";
        throw ConfigError(key, msg);
    }
    it->set(cfg, key, value);
}

void validate(const ExperimentConfig& cfg) {
    if (cfg.horizon < 1) throw ConfigError("horizon", "must be at least 1");
    if (cfg.replications < 1) throw ConfigError("replications", "must be at least 1");
    if (cfg.tensor.empty()) {
        const Dims dims = cfg.resolved_dims();
        const Dims ranks = cfg.resolved_ranks();
        if (ranks.size() != dims.size()) throw ConfigError("ranks", "needs one entry per mode");
        for (Index j = 0; j < dims.size(); ++j)
            if (ranks[j] > dims[j]) throw ConfigError("ranks", "rank exceeds the mode size");
        if (cfg.context_dim >= dims.size()) throw ConfigError("context_dim", "must leave at least one decision mode");
    }
    if (!cfg.context_replay.empty() && cfg.context_dim == 0)
        throw ConfigError("context_replay", "requires context_dim > 0");
    if (cfg.policy == "elimination" && cfg.context_dim > 0)
        throw ConfigError("policy", "elimination is context-free; set context_dim = 0");
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ConfigError("", "line " + std::to_string(number) + ": expected key = value");
        const std::string key = trim(body.substr(0, eq));
        const std::string value = trim(body.substr(eq + 1));
        if (value.empty()) throw ConfigError(key, "missing value");
        apply_setting(cfg, key, value);
    }
    validate(cfg);
    return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
    return parse_config_text(read_file(path, "config"));
}

void apply_env_overrides(ExperimentConfig& cfg) {
    if (const char* s = std::getenv("TB_SEED"); s && *s) apply_setting(cfg, "seed", s);
}

std::vector<std::pair<std::string, std::string>> describe(const ExperimentConfig& cfg) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& k : key_table())
        if (k.get) out.emplace_back(k.name, k.get(cfg));
    return out;
}

// --- runs -------------------------------------------------------------------

Environment make_environment(const ExperimentConfig& cfg, Index replication) {
    Environment env;
    if (cfg.tensor.empty()) {
        env = synth_env(cfg.resolved_dims(), cfg.resolved_ranks(), cfg.w, cfg.noise_std, cfg.context_dim,
                        derive_seed(cfg.seed, replication, "environment"));
    } else {
        env = load_env(cfg.tensor, cfg.noise_std, cfg.context_dim);
        env.seed = cfg.seed;
    }
    if (!cfg.context_replay.empty())
        env.context_replay = load_context_replay(cfg.context_replay, env.dims(), cfg.context_dim);
    return env;
}

std::unique_ptr<Policy> make_policy(const ExperimentConfig& cfg, const Environment& env, Index replication) {
    const Dims& dims = env.dims();
    const Dims ranks = cfg.ranks.empty() ? Dims(dims.size(), cfg.r) : cfg.ranks;
    if (ranks.size() != dims.size()) throw ConfigError("ranks", "needs one entry per mode of the tensor");
    CompletionOptions completion;
    completion.ranks = ranks;
    completion.tolerance = cfg.completion_tolerance;
    completion.max_iterations = cfg.completion_max_iterations;

    if (cfg.policy == "oracle") return std::make_unique<OraclePolicy>(env);
    if (cfg.policy == "vectorized_ucb") return std::make_unique<UcbPolicy>(dims, env.context_dim, cfg.alpha);
    if (cfg.policy == "epoch_greedy") {
        EpochGreedyConfig c{dims, ranks, env.context_dim, cfg.init_constant, cfg.c2, completion};
        return std::make_unique<EpochGreedyPolicy>(std::move(c));
    }
    if (cfg.policy == "elimination") {
        if (env.context_dim > 0) throw ConfigError("policy", "elimination is context-free; set context_dim = 0");
        EliminationConfig c;
        c.dims = dims;
        c.ranks = ranks;
        c.horizon = cfg.horizon;
        c.init_constant = cfg.init_constant;
        c.c0 = cfg.c0;
        c.n1 = cfg.n1;
        c.lambda1 = cfg.lambda1;
        c.lambda2 = cfg.lambda2;
        c.xi_multiplier = cfg.xi_multiplier;
        c.delta = cfg.delta;
        c.completion = completion;
        try {
            return std::make_unique<EliminationPolicy>(std::move(c));
        } catch (const std::invalid_argument& e) {
            throw ConfigError("horizon", e.what());
        }
    }
    if (cfg.policy == "ensemble") {
        EnsemblePrior prior = EnsemblePrior::standard(dims, ranks, cfg.ensemble_size, std::sqrt(cfg.sigma_tilde2),
                                                      cfg.reward_sigma, cfg.prior_sigma);
        FitOptions fit;
        fit.initial_sweeps = cfg.initial_sweeps;
        fit.sweeps_per_step = cfg.sweeps_per_step;
        return std::make_unique<EnsemblePolicy>(std::move(prior), dims, ranks, env.context_dim,
                                                derive_seed(cfg.seed, replication, "ensemble"), fit);
    }
    throw ConfigError("policy", "unknown policy '" + cfg.policy + "'");
}

ReplicationResult run_replication(const ExperimentConfig& cfg, Index replication) {
    const Environment env = make_environment(cfg, replication);
    auto policy = make_policy(cfg, env, replication);
    Rng noise = make_stream(cfg.seed, replication, "noise");
    Rng contexts = make_stream(cfg.seed, replication, "context");
    Rng policy_rng = make_stream(cfg.seed, replication, "policy");

    ReplicationResult out;
    out.regret.instantaneous.reserve(cfg.horizon);
    out.regret.cumulative.reserve(cfg.horizon);
    out.arms.reserve(cfg.horizon);
    out.phases.reserve(cfg.horizon);
    for (Index t = 0; t < cfg.horizon; ++t) {
        std::optional<Context> ctx;
        if (env.context_dim > 0) ctx = next_context(env, t, contexts);
        Arm arm = policy->choose(policy_rng, ctx);
        const double y = pull(env, arm, noise);
        record_regret(out.regret, env, ctx, arm);
        out.phases.push_back(policy->phase());
        policy->observe(arm, y, policy_rng);
        out.arms.push_back(std::move(arm));
    }
    return out;
}

std::vector<ReplicationResult> run_replications(const ExperimentConfig& cfg) {
    std::vector<ReplicationResult> results(cfg.replications);
    parallel_for(cfg.replications, cfg.threads, [&](Index rep) { results[rep] = run_replication(cfg, rep); });
    return results;
}

std::vector<Index> checkpoint_steps(Index horizon, Index stride) {
    std::vector<Index> steps;
    for (Index t = stride; t <= horizon; t += stride) steps.push_back(t);
    if (steps.empty() || steps.back() != horizon) steps.push_back(horizon);
    return steps;
}

RunSummary summarize(const std::string& policy, const std::vector<ReplicationResult>& results, Index stride) {
    if (results.empty()) throw std::invalid_argument("summarize: no replications");
    RunSummary s;
    s.policy = policy;
    s.horizon = results.front().regret.size();
    s.checkpoints = checkpoint_steps(s.horizon, stride);
    for (Index t : s.checkpoints) {
        std::vector<double> at;
        for (const auto& r : results) at.push_back(r.regret.cumulative.at(t - 1));
        s.mean.push_back(mean(at));
        s.std.push_back(stddev(at));
    }
    for (const auto& r : results) s.final_regrets.push_back(r.regret.total());
    return s;
}

void write_trace(std::ostream& out, const ExperimentConfig& cfg, const std::vector<ReplicationResult>& results) {
    out << "replication,t,policy,phase,arm,inst_regret,cum_regret\n";
    out.precision(17);
    for (Index rep = 0; rep < results.size(); ++rep) {
        const auto& r = results[rep];
        const Index n = r.regret.size();
        auto row = [&](Index t) {
            out << rep + 1 << ',' << t << ',' << cfg.policy << ',' << r.phases[t - 1] << ',' << arm_label(r.arms[t - 1])
                << ',' << r.regret.instantaneous[t - 1] << ',' << r.regret.cumulative[t - 1] << '\n';
        };
        if (cfg.full_trace) {
            for (Index t = 1; t <= n; ++t) row(t);
        } else {
            for (Index t : checkpoint_steps(n, cfg.checkpoint_stride)) row(t);
        }
    }
}

void write_summary(std::ostream& out, const ExperimentConfig& cfg, const RunSummary& summary) {
    nlohmann::ordered_json j;
    j["policy"] = summary.policy;
    j["horizon"] = summary.horizon;
    j["replications"] = summary.final_regrets.size();
    j["checkpoints"] = summary.checkpoints;
    j["mean"] = summary.mean;
    j["std"] = summary.std;
    j["final_regrets"] = summary.final_regrets;
    j["wall_clock_seconds"] = summary.wall_clock;
    nlohmann::ordered_json settings;
    for (const auto& [k, v] : describe(cfg)) settings[k] = v;
    j["config"] = settings;
    out << j.dump(2) << '\n';
}

RunSummary run_experiment(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& out_dir) {
    validate(cfg);
    const auto start = std::chrono::steady_clock::now();
    const auto results = run_replications(cfg);
    RunSummary summary = summarize(cfg.policy, results, cfg.checkpoint_stride);
    summary.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (out_dir) {
        std::filesystem::create_directories(*out_dir);
        std::ofstream trace(*out_dir / "trace.csv", std::ios::binary);
        write_trace(trace, cfg, results);
        std::ofstream json(*out_dir / "summary.json", std::ios::binary);
        write_summary(json, cfg, summary);
        if (!trace || !json) throw std::runtime_error("failed writing results to " + out_dir->string());
    }
    return summary;
}

// --- tuning -------------------------------------------------------------------

std::vector<GridAxis> parse_grid_text(const std::string& text) {
    std::vector<GridAxis> grid;
    std::istringstream in(text);
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ConfigError("", "grid line " + std::to_string(number) + ": expected key = v1, v2, ...");
        GridAxis axis{trim(body.substr(0, eq)), {}};
        std::istringstream values(body.substr(eq + 1));
        std::string v;
        while (std::getline(values, v, ','))
            if (auto t = trim(v); !t.empty()) axis.values.push_back(t);
        if (axis.values.empty()) throw ConfigError(axis.key, "grid needs at least one value");
        ExperimentConfig probe;
        for (const auto& value : axis.values) apply_setting(probe, axis.key, value);
        grid.push_back(std::move(axis));
    }
    if (grid.empty()) throw ConfigError("", "grid is empty");
    return grid;
}

std::vector<GridAxis> parse_grid(const std::filesystem::path& path) { return parse_grid_text(read_file(path, "grid")); }

GridResult grid_search(const ExperimentConfig& cfg, const std::vector<GridAxis>& grid) {
    GridResult result;
    result.best = cfg;
    for (const auto& axis : grid) {
        std::optional<double> best_score;
        std::string best_value;
        for (const auto& value : axis.values) {
            ExperimentConfig trial = result.best;
            apply_setting(trial, axis.key, value);
            validate(trial);
            const auto runs = run_replications(trial);
            std::vector<double> finals;
            for (const auto& r : runs) finals.push_back(r.regret.total());
            const double score = mean(finals);
            result.table.push_back({axis.key, value, score});
            if (!best_score || score < *best_score) {
                best_score = score;
                best_value = value;
            }
        }
        apply_setting(result.best, axis.key, best_value);
        result.chosen.emplace_back(axis.key, best_value);
    }
    return result;
}

// --- aggregation ----------------------------------------------------------------

std::vector<double> TraceSet::final_regrets() const {
    std::vector<double> out;
    for (const auto& c : cumulative) out.push_back(c.back());
    return out;
}

TraceSet read_trace(std::istream& in, const std::string& name) {
    TraceSet set;
    set.name = name;
    std::string line;
    std::size_t number = 1;
    if (!std::getline(in, line) || trim(line) != "replication,t,policy,phase,arm,inst_regret,cum_regret")
        throw ParseError(1, "not a trace file (bad header)");
    std::map<Index, std::vector<std::pair<Index, double>>> reps;
    while (std::getline(in, line)) {
        ++number;
        if (trim(line).empty()) continue;
        std::vector<std::string> f;
        std::istringstream cells(line);
        std::string cell;
        while (std::getline(cells, cell, ',')) f.push_back(cell);
        if (f.size() != 7) throw ParseError(number, "expected 7 fields");
        try {
            const Index rep = std::stoull(f[0]);
            const Index t = std::stoull(f[1]);
            if (set.policy.empty()) set.policy = f[2];
            reps[rep].emplace_back(t, std::stod(f[6]));
        } catch (const std::logic_error&) {
            throw ParseError(number, "malformed number");
        }
    }
    if (reps.empty()) throw ParseError(number, "trace has no rows");
    for (auto& [rep, rows] : reps) {
        std::vector<Index> steps;
        std::vector<double> values;
        for (const auto& [t, v] : rows) {
            steps.push_back(t);
            values.push_back(v);
        }
        if (set.steps.empty()) set.steps = steps;
        else if (steps != set.steps) throw ParseError(number, "replications disagree on checkpoint steps");
        set.cumulative.push_back(std::move(values));
    }
    set.horizon = set.steps.back();
    return set;
}

TraceSet read_trace(const std::filesystem::path& path_or_dir) {
    const auto file = std::filesystem::is_directory(path_or_dir) ? path_or_dir / "trace.csv" : path_or_dir;
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open trace '" + file.string() + "'");
    const auto name = std::filesystem::is_directory(path_or_dir) ? path_or_dir.filename().string()
                                                                 : file.stem().string();
    return read_trace(in, name.empty() ? file.parent_path().filename().string() : name);
}

AggregateReport aggregate(const std::vector<TraceSet>& sets) {
    if (sets.empty()) throw std::invalid_argument("aggregate: no trace sets");
    AggregateReport report;
    for (const auto& s : sets) {
        if (s.horizon != sets.front().horizon)
            throw std::invalid_argument("aggregate: horizon mismatch (" + sets.front().name + " has " +
                                        std::to_string(sets.front().horizon) + ", " + s.name + " has " +
                                        std::to_string(s.horizon) + ")");
        RunSummary sum;
        sum.policy = s.policy;
        sum.horizon = s.horizon;
        sum.checkpoints = s.steps;
        for (Index k = 0; k < s.steps.size(); ++k) {
            std::vector<double> at;
            for (const auto& c : s.cumulative) at.push_back(c[k]);
            sum.mean.push_back(mean(at));
            sum.std.push_back(stddev(at));
        }
        sum.final_regrets = s.final_regrets();
        report.summaries.push_back(std::move(sum));
        report.names.push_back(s.name);
    }
    for (Index a = 0; a < sets.size(); ++a)
        for (Index b = a + 1; b < sets.size(); ++b) {
            const auto fa = sets[a].final_regrets();
            const auto fb = sets[b].final_regrets();
            Comparison c{sets[a].name, sets[b].name};
            if (fa.size() >= 2 && fb.size() >= 2) {
                const WelchResult w = welch_t(fa, fb);
                c.t = w.t;
                c.df = w.df;
                c.p_value = w.p_value;
            }
            c.reduction_percent = percent_reduction(mean(fa), mean(fb));
            report.comparisons.push_back(c);
        }
    return report;
}

void write_report(std::ostream& out, const AggregateReport& report) {
    nlohmann::ordered_json j;
    j["runs"] = nlohmann::ordered_json::array();
    for (Index k = 0; k < report.summaries.size(); ++k) {
        const auto& s = report.summaries[k];
        nlohmann::ordered_json run;
        run["name"] = report.names[k];
        run["policy"] = s.policy;
        run["horizon"] = s.horizon;
        run["final_mean"] = mean(s.final_regrets);
        run["final_std"] = stddev(s.final_regrets);
        run["checkpoints"] = s.checkpoints;
        run["mean"] = s.mean;
        run["std"] = s.std;
        j["runs"].push_back(run);
    }
    j["comparisons"] = nlohmann::ordered_json::array();
    for (const auto& c : report.comparisons) {
        nlohmann::ordered_json row;
        row["baseline"] = c.baseline;
        row["candidate"] = c.candidate;
        row["welch_t"] = std::isfinite(c.t) ? nlohmann::ordered_json(c.t) : nlohmann::ordered_json(format_double(c.t));
        row["df"] = c.df;
        row["p_value"] = c.p_value;
        row["reduction_percent"] = std::isfinite(c.reduction_percent)
                                       ? nlohmann::ordered_json(c.reduction_percent)
                                       : nlohmann::ordered_json(format_double(c.reduction_percent));
        j["comparisons"].push_back(row);
    }
    out << j.dump(2) << '\n';
}

}  // namespace tb
