#include "tensor_bandits/environment.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace tb {

namespace {

MatrixXd gaussian_orthonormal(Index p, Index r, Rng& rng) {
    MatrixXd g(p, r);
    for (Eigen::Index c = 0; c < g.cols(); ++c)
        for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, c) = standard_normal(rng);
    Eigen::HouseholderQR<MatrixXd> qr(g);
    return qr.householderQ() * MatrixXd::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(r));
}

}  // namespace

Environment synth_env(const Dims& dims, const Dims& ranks, double w, double noise_std,
                      Index context_dim, std::uint64_t seed) {
    check_dims(dims);
    if (ranks.size() != dims.size()) throw std::invalid_argument("synth_env: ranks/dims order mismatch");
    for (Index j = 0; j < dims.size(); ++j)
        if (ranks[j] < 1 || ranks[j] > dims[j])
            throw std::invalid_argument("synth_env: rank " + std::to_string(ranks[j]) +
                                        " exceeds dimension " + std::to_string(dims[j]));
    if (!(w > 0)) throw std::invalid_argument("synth_env: signal strength w must be positive");
    if (noise_std < 0) throw std::invalid_argument("synth_env: noise_std must be nonnegative");
    if (context_dim > dims.size()) throw std::invalid_argument("synth_env: context_dim exceeds order");

    Rng rng = make_stream(seed, 0, "truth");
    Tucker t;
    t.core = DenseTensor(ranks);
    const double strength = w * std::sqrt(static_cast<double>(element_count(dims)));
    const Index diag = *std::min_element(ranks.begin(), ranks.end());
    for (Index i = 0; i < diag; ++i) t.core(Arm(std::vector<Index>(dims.size(), i))) = strength;
    for (Index j = 0; j < dims.size(); ++j) t.factors.push_back(gaussian_orthonormal(dims[j], ranks[j], rng));

    Environment env;
    env.truth = tucker_reconstruct(t);
    env.noise_std = noise_std;
    env.context_dim = context_dim;
    env.seed = seed;
    env.generator = std::move(t);
    return env;
}

Environment synth_env(Index p, Index r, double w, double noise_std, Index context_dim,
                      std::uint64_t seed) {
    if (r > p) throw std::invalid_argument("synth_env: rank " + std::to_string(r) + " exceeds p " + std::to_string(p));
    return synth_env(Dims{p, p, p}, Dims{r, r, r}, w, noise_std, context_dim, seed);
}

DenseTensor load_tensor(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open tensor file " + path.string());
    return read_tensor<double>(in);
}

void save_tensor(const std::filesystem::path& path, const DenseTensor& x) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write tensor file " + path.string());
    write_tensor(out, x);
}

Environment load_env(const std::filesystem::path& path, double noise_std, Index context_dim) {
    if (noise_std < 0) throw std::invalid_argument("load_env: noise_std must be nonnegative");
    Environment env;
    env.truth = load_tensor(path);
    if (context_dim > env.truth.order()) throw std::invalid_argument("load_env: context_dim exceeds order");
    env.noise_std = noise_std;
    env.context_dim = context_dim;
    return env;
}

std::vector<Context> load_context_replay(const std::filesystem::path& path, const Dims& dims,
                                         Index context_dim) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open context replay file " + path.string());
    std::vector<Context> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream row(line);
        Context c;
        long long v = 0;
        while (row >> v) {
            if (v < 1) throw ParseError(line_no, "context indices are 1-based");
            c.push_back(static_cast<Index>(v - 1));
        }
        if (!row.eof()) throw ParseError(line_no, "non-integer context index");
        if (c.empty()) continue;
        if (c.size() != context_dim)
            throw ParseError(line_no, "expected " + std::to_string(context_dim) + " context indices");
        for (Index j = 0; j < c.size(); ++j)
            if (c[j] >= dims.at(j)) throw ParseError(line_no, "context index out of range");
        out.push_back(std::move(c));
    }
    return out;
}

double pull(const Environment& env, const Arm& arm, Rng& rng) {
    const double mean = env.truth(arm);
    if (env.noise_std == 0.0) return mean;
    return mean + env.noise_std * standard_normal(rng);
}

Context draw_context(const Environment& env, Rng& rng) {
    if (env.context_dim == 0) throw ContractViolation("draw_context: environment has no context modes");
    Context c;
    c.reserve(env.context_dim);
    for (Index j = 0; j < env.context_dim; ++j) c.push_back(uniform_index(env.dims()[j], rng));
    return c;
}

Context next_context(const Environment& env, Index step, Rng& rng) {
    if (!env.context_replay.empty()) return env.context_replay[step % env.context_replay.size()];
    return draw_context(env, rng);
}

OracleChoice best_entry(const DenseTensor& x, const std::optional<Context>& context) {
    Index start = 0;
    Index len = x.size();
    if (context) std::tie(start, len) = slice_range(*context, x.dims());
    const Index best = start + argmax_first(x.values().segment(static_cast<Eigen::Index>(start),
                                                                static_cast<Eigen::Index>(len)));
    return {arm_from_offset(best, x.dims()), x[best]};
}

OracleChoice oracle(const Environment& env, const std::optional<Context>& context) {
    if (context && context->size() != env.context_dim)
        throw std::invalid_argument("oracle: context length does not match environment");
    return best_entry(env.truth, context);
}

RegretTrace& record_regret(RegretTrace& trace, const Environment& env,
                           const std::optional<Context>& context, const Arm& arm) {
    const double best = oracle(env, context).value;
    const double gap = best - env.truth(arm);
    trace.instantaneous.push_back(gap);
    trace.cumulative.push_back(trace.total() + gap);
    return trace;
}

}  // namespace tb
