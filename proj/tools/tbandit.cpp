// tbandit: command-line front end for tensor bandit experiments.
//
//   tbandit run --config exp.cfg [--out dir] [--threads k] [--full-trace]
//   tbandit tune --config exp.cfg --grid grid.cfg [--out dir]
//   tbandit aggregate dirA dirB ... --report report.json
//   tbandit complete --tensor x.txt --obs obs.txt --ranks 2,2,2 --out xhat.txt
//
// Exit codes: 0 success, 1 configuration error, 2 runtime error.

#include "tensor_bandits/completion.hpp"
#include "tensor_bandits/environment.hpp"
#include "tensor_bandits/harness.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

tb::Observations read_observations(const std::string& path, const tb::Dims& dims) {
    std::ifstream in(path);
    if (!in) throw tb::ConfigError("obs", "cannot open '" + path + "'");
    tb::Observations obs;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        std::istringstream fields(line);
        std::vector<double> v;
        double x;
        while (fields >> x) v.push_back(x);
        if (!fields.eof()) throw tb::ParseError(number, "non-numeric field");
        if (v.empty()) continue;
        if (v.size() != dims.size() + 1)
            throw tb::ParseError(number, "expected " + std::to_string(dims.size()) + " indices and a reward");
        tb::Arm arm;
        for (std::size_t j = 0; j < dims.size(); ++j) {
            const double i = v[j];
            if (i < 1 || i > static_cast<double>(dims[j]) || i != static_cast<double>(static_cast<tb::Index>(i)))
                throw tb::ParseError(number, "index out of range in mode " + std::to_string(j + 1));
            arm.index.push_back(static_cast<tb::Index>(i) - 1);
        }
        obs.push_back({std::move(arm), v.back()});
    }
    return obs;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stochastic low-rank tensor bandits"};
    app.require_subcommand(1);

    std::string config_path, out_dir, grid_path, report_path;
    tb::Index threads = 0;
    bool full_trace = false;

    auto* run = app.add_subcommand("run", "Run replicated experiments");
    run->add_option("--config", config_path, "Config file")->required();
    run->add_option("--out", out_dir, "Output directory (default: output key)");
    run->add_option("--threads", threads, "Worker threads");
    run->add_flag("--full-trace", full_trace, "Write every step to the trace");

    auto* tune = app.add_subcommand("tune", "Sequential grid search");
    tune->add_option("--config", config_path, "Config file")->required();
    tune->add_option("--grid", grid_path, "Grid file")->required();
    tune->add_option("--out", out_dir, "Directory for tune.csv and best.cfg");
    tune->add_option("--threads", threads, "Worker threads");

    std::vector<std::string> trace_dirs;
    auto* agg = app.add_subcommand("aggregate", "Compare trace sets");
    agg->add_option("traces", trace_dirs, "Run directories or trace files")->required();
    agg->add_option("--report", report_path, "Report file (JSON)")->required();

    std::string tensor_path, obs_path, ranks_text, completion_out;
    auto* comp = app.add_subcommand("complete", "Low-rank completion of observed entries");
    comp->add_option("--tensor", tensor_path, "Tensor file giving the dims")->required();
    comp->add_option("--obs", obs_path, "Observations: 1-based indices then reward, one per line")->required();
    comp->add_option("--ranks", ranks_text, "Comma-separated Tucker ranks")->required();
    comp->add_option("--out", completion_out, "Where to write the completed tensor")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*run || *tune) {
            tb::ExperimentConfig cfg = tb::parse_config(config_path);
            tb::apply_env_overrides(cfg);
            if (threads > 0) cfg.threads = threads;
            if (*run) {
                if (full_trace) cfg.full_trace = true;
                const std::string dir = out_dir.empty() ? cfg.output : out_dir;
                const tb::RunSummary s = tb::run_experiment(cfg, dir);
                std::cout << cfg.policy << ": mean final regret " << s.mean.back() << " (sd " << s.std.back()
                          << ") over " << s.final_regrets.size() << " replications, " << s.wall_clock << " s\n";
            } else {
                const tb::GridResult g = tb::grid_search(cfg, tb::parse_grid(grid_path));
                std::ostringstream table;
                table << "key,value,mean_final_regret\n";
                table.precision(17);
                for (const auto& row : g.table) table << row.key << ',' << row.value << ',' << row.mean_final_regret << '\n';
                std::cout << table.str();
                for (const auto& [k, v] : g.chosen) std::cout << "best " << k << " = " << v << '\n';
                if (!out_dir.empty()) {
                    std::filesystem::create_directories(out_dir);
                    std::ofstream(std::filesystem::path(out_dir) / "tune.csv") << table.str();
                    std::ofstream best(std::filesystem::path(out_dir) / "best.cfg");
                    for (const auto& [k, v] : tb::describe(g.best)) best << k << " = " << v << '\n';
                }
            }
        } else if (*agg) {
            std::vector<tb::TraceSet> sets;
            for (const auto& d : trace_dirs) sets.push_back(tb::read_trace(d));
            const tb::AggregateReport report = tb::aggregate(sets);
            std::ofstream out(report_path);
            if (!out) throw std::runtime_error("cannot write '" + report_path + "'");
            tb::write_report(out, report);
            for (const auto& c : report.comparisons)
                std::cout << c.baseline << " vs " << c.candidate << ": t = " << c.t << ", p = " << c.p_value
                          << ", reduction " << c.reduction_percent << "%\n";
        } else if (*comp) {
            const tb::DenseTensor shape = tb::load_tensor(tensor_path);
            tb::CompletionOptions opts;
            try {
                std::istringstream in(ranks_text);
                std::string item;
                while (std::getline(in, item, ',')) opts.ranks.push_back(std::stoull(item));
            } catch (const std::logic_error&) {
                throw tb::ConfigError("ranks", "expected comma-separated positive integers");
            }
            const tb::Observations obs = read_observations(obs_path, shape.dims());
            const tb::Tucker est = tb::complete(obs, shape.dims(), opts);
            tb::save_tensor(completion_out, tb::tucker_reconstruct(est));
        }
    } catch (const tb::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
