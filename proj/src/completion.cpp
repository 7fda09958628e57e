#include "tensor_bandits/completion.hpp"

#include <Eigen/Eigenvalues>

#include <string>

namespace tb {

void validate_observations(const Observations& obs, const Dims& dims, const CompletionOptions& opts) {
    check_dims(dims);
    if (opts.ranks.size() != dims.size())
        throw std::invalid_argument("completion: ranks must have one entry per mode");
    for (Index j = 0; j < dims.size(); ++j)
        if (opts.ranks[j] < 1 || opts.ranks[j] > dims[j])
            throw std::invalid_argument("completion: rank " + std::to_string(opts.ranks[j]) +
                                        " invalid for mode of size " + std::to_string(dims[j]));
    if (!(opts.tolerance > 0)) throw std::invalid_argument("completion: tolerance must be positive");
    if (opts.max_iterations < 1) throw std::invalid_argument("completion: max_iterations must be >= 1");
    if (obs.size() < 2)
        throw InsufficientData("completion needs at least 2 observations, got " +
                               std::to_string(obs.size()));
    for (const auto& o : obs) (void)flat_offset(o.arm, dims);
}

DenseTensor unbiased_estimate(const Observations& obs, const Dims& dims) {
    DenseTensor x(dims);
    if (obs.empty()) return x;
    for (const auto& o : obs) x[flat_offset(o.arm, dims)] += o.reward;
    x.values() *= static_cast<double>(element_count(dims)) / static_cast<double>(obs.size());
    return x;
}

MatrixXd u_statistic(const Observations& obs, const Dims& dims, Index mode) {
    if (obs.size() < 2) throw InsufficientData("U-statistic needs at least 2 observations");
    DenseTensor sum(dims);
    const auto p = static_cast<Eigen::Index>(dims.at(mode));
    VectorXd diag = VectorXd::Zero(p);
    for (const auto& o : obs) {
        sum[flat_offset(o.arm, dims)] += o.reward;
        diag[static_cast<Eigen::Index>(o.arm[mode])] += o.reward * o.reward;
    }
    const MatrixXd b = matricize(sum, mode);
    MatrixXd r = b * b.transpose();
    r.diagonal() -= diag;
    const double big_p = static_cast<double>(element_count(dims));
    const double t = static_cast<double>(obs.size());
    r *= big_p * big_p / (t * (t - 1.0));
    return r;
}

namespace {

MatrixXd top_eigenvectors(const MatrixXd& sym, Index r) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym);
    if (es.info() != Eigen::Success) throw NumericError("eigendecomposition did not converge");
    // eigenvalues ascending; take the r algebraically largest
    MatrixXd u = es.eigenvectors().rightCols(static_cast<Eigen::Index>(r)).rowwise().reverse();
    fix_column_signs(u);
    return u;
}

}  // namespace

SpectralInit spectral_initialize(const Observations& obs, const Dims& dims,
                                 const CompletionOptions& opts) {
    validate_observations(obs, dims, opts);
    SpectralInit init;
    init.x_ini = unbiased_estimate(obs, dims);
    init.factors.reserve(dims.size());
    for (Index j = 0; j < dims.size(); ++j)
        init.factors.push_back(top_eigenvectors(u_statistic(obs, dims, j), opts.ranks[j]));
    return init;
}

PowerIteration power_iterate(const DenseTensor& x_ini, const std::vector<MatrixXd>& factors0,
                             const CompletionOptions& opts) {
    const Index d = x_ini.order();
    if (factors0.size() != d) throw std::invalid_argument("power_iterate: need one factor per mode");
    for (Index j = 0; j < d; ++j) {
        if (static_cast<Index>(factors0[j].rows()) != x_ini.dim(j))
            throw std::invalid_argument("power_iterate: factor " + std::to_string(j) + " has wrong row count");
        if (orthonormality_defect(factors0[j]) > 1e-8)
            throw ContractViolation("power_iterate: initial factor " + std::to_string(j) +
                                    " is not orthonormal");
    }

    PowerIteration result;
    result.factors = factors0;
    result.projected_norms.push_back(norms(project(x_ini, result.factors)).frobenius);

    for (Index sweep = 0; sweep < opts.max_iterations; ++sweep) {
        for (Index j = 0; j < d; ++j) {
            DenseTensor partial = x_ini;
            for (Index l = 0; l < d; ++l)
                if (l != j) partial = marginal_multiply(partial, result.factors[l].transpose(), l);
            const auto r = static_cast<Index>(result.factors[j].cols());
            result.factors[j] = truncated_svd_left(matricize(partial, j), r);
        }
        ++result.sweeps;
        const double norm = norms(project(x_ini, result.factors)).frobenius;
        const double increment = norm - result.projected_norms.back();
        result.projected_norms.push_back(norm);
        if (increment <= opts.tolerance) break;
    }
    return result;
}

Tucker complete(const Observations& obs, const Dims& dims, const CompletionOptions& opts) {
    const auto init = spectral_initialize(obs, dims, opts);
    auto refined = power_iterate(init.x_ini, init.factors, opts);
    Tucker t;
    t.core = project(init.x_ini, refined.factors);
    t.factors = std::move(refined.factors);
    return t;
}

}  // namespace tb
