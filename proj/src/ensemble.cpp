#include "tensor_bandits/ensemble.hpp"

#include "tensor_bandits/environment.hpp"

#include <cmath>

namespace tb {

EnsemblePrior EnsemblePrior::standard(const Dims& dims, const Dims& ranks, Index ensemble_size,
                                      double sigma_tilde, double sigma, double sigma_k) {
    EnsemblePrior prior;
    for (Index j = 0; j < dims.size(); ++j) {
        prior.mu.push_back(MatrixXd::Zero(static_cast<Eigen::Index>(dims[j]), static_cast<Eigen::Index>(ranks[j])));
        prior.sigma_k.push_back(sigma_k);
    }
    prior.sigma = sigma;
    prior.sigma_tilde = sigma_tilde;
    prior.ensemble_size = ensemble_size;
    return prior;
}

namespace {

// Kronecker product of the factor rows at `arm`, skipping `skip` (pass d to keep all).
VectorXd row_kron(const Tucker& model, const Arm& arm, Index skip) {
    VectorXd out = VectorXd::Ones(1);
    for (Index j = 0; j < model.factors.size(); ++j) {
        if (j == skip) continue;
        const auto row = model.factors[j].row(static_cast<Eigen::Index>(arm[j]));
        VectorXd next(out.size() * row.size());
        for (Eigen::Index a = 0; a < out.size(); ++a) next.segment(a * row.size(), row.size()) = out[a] * row.transpose();
        out = std::move(next);
    }
    return out;
}

struct RowSystems {
    std::vector<MatrixXd> gram;
    std::vector<VectorXd> rhs;
};

RowSystems accumulate_rows(const Tucker& model, const Observations& history, Index mode) {
    const MatrixXd unfolded = matricize(model.core, mode);
    const auto p = static_cast<Index>(model.factors[mode].rows());
    const auto r = unfolded.rows();
    RowSystems sys{std::vector<MatrixXd>(p, MatrixXd::Zero(r, r)), std::vector<VectorXd>(p, VectorXd::Zero(r))};
    for (const auto& o : history) {
        const VectorXd v = unfolded * row_kron(model, o.arm, mode);
        const Index i = o.arm[mode];
        sys.gram[i].selfadjointView<Eigen::Lower>().rankUpdate(v);
        sys.rhs[i] += o.reward * v;
    }
    return sys;
}

VectorXd solve_row(const MatrixXd& gram, const VectorXd& rhs, double inv_noise, double inv_prior,
                   const VectorXd& prior_row) {
    if (std::isinf(inv_prior)) return prior_row;
    MatrixXd a = inv_noise * gram.selfadjointView<Eigen::Lower>().toDenseMatrix();
    a.diagonal().array() += inv_prior;
    const VectorXd b = inv_noise * rhs + inv_prior * prior_row;
    return a.ldlt().solve(b);
}

double prior_penalty(const Tucker& model, const std::vector<MatrixXd>& prior_rows, const EnsemblePrior& prior) {
    double total = 0.0;
    for (Index k = 0; k < model.factors.size(); ++k)
        if (prior.sigma_k[k] > 0)
            total += (model.factors[k] - prior_rows[k]).squaredNorm() / (prior.sigma_k[k] * prior.sigma_k[k]);
    return total;
}

}  // namespace

double model_entry(const Tucker& model, const Arm& arm) {
    return model.core.values().dot(row_kron(model, arm, model.factors.size()));
}

double map_objective(const Tucker& model, const Observations& history,
                     const std::vector<MatrixXd>& prior_rows, const EnsemblePrior& prior) {
    double misfit = 0.0;
    for (const auto& o : history) {
        const double e = o.reward - model_entry(model, o.arm);
        misfit += e * e;
    }
    return misfit / (prior.sigma * prior.sigma) + prior_penalty(model, prior_rows, prior);
}

VectorXd als_row_update(const Tucker& model, const Observations& history, Index mode, Index row,
                        const EnsemblePrior& prior, const VectorXd& prior_row) {
    const MatrixXd unfolded = matricize(model.core, mode);
    const auto r = unfolded.rows();
    MatrixXd gram = MatrixXd::Zero(r, r);
    VectorXd rhs = VectorXd::Zero(r);
    bool hit = false;
    for (const auto& o : history) {
        if (o.arm[mode] != row) continue;
        hit = true;
        const VectorXd v = unfolded * row_kron(model, o.arm, mode);
        gram.selfadjointView<Eigen::Lower>().rankUpdate(v);
        rhs += o.reward * v;
    }
    if (!hit) return prior_row;
    const double sk = prior.sigma_k.at(mode);
    return solve_row(gram, rhs, 1.0 / (prior.sigma * prior.sigma), 1.0 / (sk * sk), prior_row);
}

DenseTensor core_update(const Tucker& model, const Observations& history, double ridge) {
    const auto n = static_cast<Eigen::Index>(model.core.size());
    MatrixXd gram = MatrixXd::Zero(n, n);
    VectorXd rhs = VectorXd::Zero(n);
    for (const auto& o : history) {
        const VectorXd phi = row_kron(model, o.arm, model.factors.size());
        gram.selfadjointView<Eigen::Lower>().rankUpdate(phi);
        rhs += o.reward * phi;
    }
    gram.diagonal().array() += ridge;
    return DenseTensor(model.core.dims(), gram.selfadjointView<Eigen::Lower>().ldlt().solve(rhs));
}

Tucker map_fit(Tucker model, const Observations& history, const std::vector<MatrixXd>& prior_rows,
               const EnsemblePrior& prior, Index sweeps, const FitOptions& opts, FitTrace* trace) {
    if (history.empty() || sweeps == 0) return model;
    const double inv_noise = 1.0 / (prior.sigma * prior.sigma);
    const bool track = trace != nullptr || sweeps > 1;
    double current = track ? map_objective(model, history, prior_rows, prior) : 0.0;
    if (trace) trace->objective.push_back(current);

    for (Index sweep = 0; sweep < sweeps; ++sweep) {
        const double before = current;
        for (Index k = 0; k < model.factors.size(); ++k) {
            // Rows of one factor are decoupled given the others, so one pass
            // over the history yields every row's normal equations.
            const RowSystems sys = accumulate_rows(model, history, k);
            const double inv_prior = 1.0 / (prior.sigma_k[k] * prior.sigma_k[k]);
            for (Index i = 0; i < sys.gram.size(); ++i) {
                const auto ii = static_cast<Eigen::Index>(i);
                model.factors[k].row(ii) =
                    solve_row(sys.gram[i], sys.rhs[i], inv_noise, inv_prior, prior_rows[k].row(ii).transpose())
                        .transpose();
                if (trace) trace->objective.push_back(map_objective(model, history, prior_rows, prior));
            }
        }

        // Core: least squares in vec(core); keep the old core unless the
        // ridge-regularized solve actually lowers the misfit.
        const auto n = static_cast<Eigen::Index>(model.core.size());
        MatrixXd gram = MatrixXd::Zero(n, n);
        VectorXd rhs = VectorXd::Zero(n);
        double yy = 0.0;
        for (const auto& o : history) {
            const VectorXd phi = row_kron(model, o.arm, model.factors.size());
            gram.selfadjointView<Eigen::Lower>().rankUpdate(phi);
            rhs += o.reward * phi;
            yy += o.reward * o.reward;
        }
        const MatrixXd g = gram.selfadjointView<Eigen::Lower>();
        MatrixXd reg = g;
        reg.diagonal().array() += opts.core_ridge;
        const VectorXd fresh = reg.ldlt().solve(rhs);
        const VectorXd& old = model.core.values();
        auto misfit = [&](const VectorXd& s) { return yy - 2.0 * rhs.dot(s) + s.dot(g * s); };
        if (fresh.allFinite() && misfit(fresh) <= misfit(old)) model.core.values() = fresh;
        if (trace) ++trace->sweeps;

        if (track) {
            current = map_objective(model, history, prior_rows, prior);
            if (trace) trace->objective.push_back(current);
            if (before - current <= opts.tolerance) break;
        }
    }
    return model;
}

// ---------------------------------------------------------------------------

TensorEnsemble::TensorEnsemble(EnsemblePrior prior, Dims dims, Dims ranks, Index context_dim,
                               std::uint64_t seed, FitOptions fit)
    : prior_(std::move(prior)), dims_(std::move(dims)), ranks_(std::move(ranks)),
      context_dim_(context_dim), fit_(fit) {
    check_dims(dims_);
    if (ranks_.size() != dims_.size()) throw std::invalid_argument("ensemble: ranks must have one entry per mode");
    if (context_dim_ >= dims_.size()) throw std::invalid_argument("ensemble: at least one decision mode is required");
    if (prior_.mu.size() != dims_.size() || prior_.sigma_k.size() != dims_.size())
        throw std::invalid_argument("ensemble: prior must have one entry per mode");
    if (!(prior_.sigma > 0)) throw std::invalid_argument("ensemble: reward sigma must be positive");
    if (prior_.sigma_tilde < 0) throw std::invalid_argument("ensemble: perturbation sigma must be nonnegative");
    if (prior_.ensemble_size < 1) throw std::invalid_argument("ensemble: need at least one model");
    for (Index k = 0; k < dims_.size(); ++k) {
        if (prior_.sigma_k[k] < 0) throw std::invalid_argument("ensemble: prior sigma must be nonnegative");
        if (prior_.mu[k].rows() != static_cast<Eigen::Index>(dims_[k]) ||
            prior_.mu[k].cols() != static_cast<Eigen::Index>(ranks_[k]))
            throw std::invalid_argument("ensemble: prior mean has wrong shape for mode " + std::to_string(k));
    }

    models_.resize(prior_.ensemble_size);
    for (Index m = 0; m < models_.size(); ++m) {
        Rng rng = make_stream(seed, m, "ensemble-init");
        Member& member = models_[m];
        for (Index k = 0; k < dims_.size(); ++k) {
            MatrixXd u = prior_.mu[k];
            for (Eigen::Index i = 0; i < u.rows(); ++i)
                for (Eigen::Index c = 0; c < u.cols(); ++c) u(i, c) += prior_.sigma_k[k] * standard_normal(rng);
            for (Eigen::Index c = 0; c < u.cols(); ++c) {
                const double norm = u.col(c).norm();
                if (norm > 0) u.col(c) /= norm;
            }
            member.current.factors.push_back(u);
        }
        member.current.core = DenseTensor::Constant(ranks_, 1.0);
        member.prior_rows = member.current.factors;
    }
}

Index TensorEnsemble::sample_model(Rng& rng) const { return uniform_index(models_.size(), rng); }

Observations TensorEnsemble::perturbed_history(Index m) const {
    const Member& member = models_.at(m);
    Observations out = shared_;
    for (Index s = 0; s < out.size(); ++s) out[s].reward += member.perturbation[s];
    return out;
}

const Tucker& TensorEnsemble::fit(Index m) {
    Member& member = models_.at(m);
    if (shared_.empty()) return member.current;
    const Index sweeps = member.fitted ? fit_.sweeps_per_step : fit_.initial_sweeps;
    member.current = map_fit(std::move(member.current), perturbed_history(m), member.prior_rows, prior_, sweeps, fit_);
    member.fitted = true;
    return member.current;
}

Arm TensorEnsemble::act(Index m, const std::optional<Context>& context) const {
    if (context && context->size() != context_dim_) throw std::invalid_argument("ensemble: context length mismatch");
    return best_entry(tucker_reconstruct(models_.at(m).current), context).arm;
}

Arm TensorEnsemble::step(Rng& rng, const std::optional<Context>& context) {
    last_sampled_ = sample_model(rng);
    fit(last_sampled_);
    return act(last_sampled_, context);
}

void TensorEnsemble::perturb_and_record(const Arm& arm, double reward, Rng& rng) {
    (void)flat_offset(arm, dims_);
    shared_.push_back({arm, reward});
    for (auto& member : models_)
        member.perturbation.push_back(prior_.sigma_tilde == 0.0 ? 0.0 : prior_.sigma_tilde * standard_normal(rng));
}

}  // namespace tb
