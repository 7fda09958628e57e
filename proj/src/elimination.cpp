#include "tensor_bandits/elimination.hpp"

#include "tensor_bandits/epoch_greedy.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace tb {

const char* to_string(EliminationPhase phase) {
    switch (phase) {
        case EliminationPhase::Initialize: return "initialize";
        case EliminationPhase::Explore: return "explore";
        case EliminationPhase::Commit: return "commit";
    }
    return "?";
}

Index exploration_length(Index n, Index p, Index r, Index d, const std::vector<double>& sigma_min,
                         double c0, Index s1) {
    if (sigma_min.size() != d) throw std::invalid_argument("exploration_length: need one sigma per mode");
    double sigma_prod = 1.0;
    for (double s : sigma_min) {
        if (!(s > 0)) throw std::domain_error("exploration_length: singular values must be positive");
        sigma_prod *= s;
    }
    if (!(c0 > 0)) throw std::domain_error("exploration_length: c0 must be positive");
    if (n < s1 + 2) throw std::invalid_argument("exploration_length: horizon leaves no room after initialization");
    const double dd = static_cast<double>(d);
    const double pd = static_cast<double>(p);
    const double value = c0 * std::pow(static_cast<double>(n), 2.0 / (dd + 2.0)) *
                         std::pow(static_cast<double>(r), dd) / sigma_prod *
                         std::pow(pd, (dd * dd + dd) / 2.0) * std::pow(std::log(pd), dd / 2.0);
    const auto upper = static_cast<double>(n - s1 - 1);
    const double clamped = std::clamp(std::ceil(value), 1.0, upper);
    return static_cast<Index>(clamped);
}

double xi_width(double delta, double lambda1, double lambda2, double norm_head, double norm_tail,
                double c) {
    if (!(delta > 0 && delta < 1)) throw std::domain_error("xi_width: delta must lie in (0, 1)");
    if (!(lambda1 > 0 && lambda2 > 0)) throw std::domain_error("xi_width: lambdas must be positive");
    if (norm_head < 0 || norm_tail < 0) throw std::domain_error("xi_width: norms must be nonnegative");
    if (!(c > 0)) throw std::domain_error("xi_width: multiplier must be positive");
    const double base = 2.0 * std::sqrt(14.0 * std::log(2.0 / delta)) +
                        std::sqrt(lambda1) * norm_head + std::sqrt(lambda2) * norm_tail;
    return c * base;
}

double default_lambda2(Index budget, Index q, double lambda1) {
    if (q == 0 || budget == 0) throw std::invalid_argument("default_lambda2: budget and q must be positive");
    const double nb = static_cast<double>(budget);
    return nb / (static_cast<double>(q) * std::log1p(nb / lambda1));
}

VectorXd ridge_blocked(const std::vector<std::pair<VectorXd, double>>& history, Index q,
                       double lambda1, double lambda2, Index dim_if_empty) {
    if (history.empty()) return VectorXd::Zero(static_cast<Eigen::Index>(dim_if_empty));
    const Eigen::Index dim = history.front().first.size();
    if (static_cast<Eigen::Index>(q) > dim) throw std::invalid_argument("ridge_blocked: q exceeds dimension");
    MatrixXd gram = MatrixXd::Zero(dim, dim);
    VectorXd rhs = VectorXd::Zero(dim);
    for (const auto& [a, y] : history) {
        if (a.size() != dim) throw std::invalid_argument("ridge_blocked: action vectors differ in length");
        gram.selfadjointView<Eigen::Lower>().rankUpdate(a);
        rhs += y * a;
    }
    gram.diagonal().head(static_cast<Eigen::Index>(q)).array() += lambda1;
    gram.diagonal().tail(dim - static_cast<Eigen::Index>(q)).array() += lambda2;
    Eigen::LLT<MatrixXd> llt(gram.selfadjointView<Eigen::Lower>());
    if (llt.info() != Eigen::Success) throw NumericError("ridge_blocked: design not positive definite");
    return llt.solve(rhs);
}

std::pair<Index, Index> run_phase_schedule(Index k, Index budget) {
    if (k < 1 || k >= 63) throw std::invalid_argument("run_phase_schedule: phase index out of range");
    const Index start = Index{1} << (k - 1);
    const Index end = std::min((Index{1} << k) - 1, budget);
    return {start, end};
}

// ---------------------------------------------------------------------------

Dims Rotation::dims() const {
    Dims d;
    for (const auto& b : bases) d.push_back(static_cast<Index>(b.rows()));
    return d;
}

namespace {

// Kronecker product of per-mode vectors in canonical (last fastest) order.
template <typename Fn>
VectorXd kron_vectors(const Dims& dims, Fn&& mode_vector) {
    VectorXd out = mode_vector(0);
    for (Index j = 1; j < dims.size(); ++j) {
        const VectorXd v = mode_vector(j);
        VectorXd next(out.size() * v.size());
        for (Eigen::Index a = 0; a < out.size(); ++a) next.segment(a * v.size(), v.size()) = out[a] * v;
        out = std::move(next);
    }
    return out;
}

}  // namespace

VectorXd Rotation::action(const Arm& arm) const {
    const Dims d = dims();
    (void)flat_offset(arm, d);
    const VectorXd canonical =
        kron_vectors(d, [&](Index j) -> VectorXd { return bases[j].row(static_cast<Eigen::Index>(arm[j])).transpose(); });
    const auto order = blocked_order(d, ranks);
    VectorXd out(canonical.size());
    for (Index k = 0; k < order.size(); ++k)
        out[static_cast<Eigen::Index>(k)] = canonical[static_cast<Eigen::Index>(order[k])];
    return out;
}

VectorXd Rotation::rotate(const DenseTensor& x) const {
    DenseTensor y = x;
    for (Index j = 0; j < bases.size(); ++j) y = marginal_multiply(y, bases[j].transpose(), j);
    return vectorize_blocked(y, ranks);
}

Rotation make_rotation(const std::vector<MatrixXd>& factors) {
    Rotation rot;
    for (const auto& u : factors) {
        rot.bases.push_back(complete_basis(u));
        rot.ranks.push_back(static_cast<Index>(u.cols()));
    }
    return rot;
}

RotatedActions build_rotated_actions(const std::vector<MatrixXd>& factors) {
    const Rotation rot = make_rotation(factors);
    const Dims d = rot.dims();
    const Index n = element_count(d);
    RotatedActions out;
    out.actions.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (Index k = 0; k < n; ++k)
        out.actions.row(static_cast<Eigen::Index>(k)) = rot.action(arm_from_offset(k, d)).transpose();
    out.q = leading_block_size(d, rot.ranks);
    return out;
}

std::vector<Index> eliminate(const std::vector<Index>& active, const VectorXd& means,
                             const VectorXd& widths, double xi) {
    if (active.empty()) throw ContractViolation("eliminate: active set is empty");
    double max_lcb = -std::numeric_limits<double>::infinity();
    double max_ucb = -std::numeric_limits<double>::infinity();
    Index best_ucb = active.front();
    for (Index a : active) {
        const auto i = static_cast<Eigen::Index>(a);
        max_lcb = std::max(max_lcb, means[i] - widths[i] * xi);
        const double ucb = means[i] + widths[i] * xi;
        if (ucb > max_ucb) {
            max_ucb = ucb;
            best_ucb = a;
        }
    }
    std::vector<Index> kept;
    for (Index a : active) {
        const auto i = static_cast<Eigen::Index>(a);
        if (means[i] + widths[i] * xi >= max_lcb || a == best_ucb) kept.push_back(a);
    }
    return kept;
}

// ---------------------------------------------------------------------------

ArmDesign::ArmDesign(const Rotation& rotation, double lambda1, double lambda2)
    : dims_(rotation.dims()), inv_l1_(1.0 / lambda1), inv_l2_(1.0 / lambda2) {
    if (!(lambda1 > 0 && lambda2 > 0)) throw std::invalid_argument("ArmDesign: lambdas must be positive");
    for (Index j = 0; j < rotation.bases.size(); ++j) {
        const auto r = static_cast<Eigen::Index>(rotation.ranks[j]);
        const MatrixXd perp = rotation.bases[j].rightCols(rotation.bases[j].cols() - r);
        perp_projectors_.push_back(perp * perp.transpose());
    }
    base_diag_ = kron_vectors(dims_, [&](Index j) -> VectorXd { return perp_projectors_[j].diagonal(); });
    base_diag_ = (inv_l2_ - inv_l1_) * base_diag_.array() + inv_l1_;
    reset(0);
}

void ArmDesign::reset(Index capacity) {
    diag_ = base_diag_;
    g_.resize(static_cast<Eigen::Index>(element_count(dims_)), static_cast<Eigen::Index>(capacity));
    used_ = 0;
}

VectorXd ArmDesign::base_column(Index arm_offset) const {
    const Arm arm = arm_from_offset(arm_offset, dims_);
    VectorXd col = kron_vectors(
        dims_, [&](Index j) -> VectorXd { return perp_projectors_[j].col(static_cast<Eigen::Index>(arm[j])); });
    col *= inv_l2_ - inv_l1_;
    col[static_cast<Eigen::Index>(arm_offset)] += inv_l1_;
    return col;
}

VectorXd ArmDesign::apply_base(const VectorXd& z) const {
    DenseTensor t(dims_, z);
    for (Index j = 0; j < dims_.size(); ++j) t = marginal_multiply(t, perp_projectors_[j], j);
    return inv_l1_ * z + (inv_l2_ - inv_l1_) * t.values();
}

void ArmDesign::add(Index arm_offset) {
    const auto j = static_cast<Eigen::Index>(arm_offset);
    const auto k = static_cast<Eigen::Index>(used_);
    VectorXd col = base_column(arm_offset);
    if (k > 0) col.noalias() -= g_.leftCols(k) * g_.row(j).head(k).transpose();
    const double h = col[j];
    col /= std::sqrt(1.0 + h);
    if (k == g_.cols()) g_.conservativeResize(Eigen::NoChange, std::max<Eigen::Index>(1, 2 * g_.cols()));
    g_.col(k) = col;
    diag_.array() -= col.array().square();
    ++used_;
}

VectorXd ArmDesign::solve(const VectorXd& z) const {
    VectorXd out = apply_base(z);
    const auto k = static_cast<Eigen::Index>(used_);
    if (k > 0) out.noalias() -= g_.leftCols(k) * (g_.leftCols(k).transpose() * z);
    return out;
}

MatrixXd ArmDesign::inverse_dense(const RotatedActions& actions) const {
    const auto n = static_cast<Eigen::Index>(element_count(dims_));
    MatrixXd m_inv(n, n);
    for (Eigen::Index c = 0; c < n; ++c) m_inv.col(c) = base_column(static_cast<Index>(c));
    const auto k = static_cast<Eigen::Index>(used_);
    if (k > 0) m_inv.noalias() -= g_.leftCols(k) * g_.leftCols(k).transpose();
    return actions.actions.transpose() * m_inv * actions.actions;
}

// ---------------------------------------------------------------------------

TensorElimination::TensorElimination(EliminationConfig config) : config_(std::move(config)) {
    check_dims(config_.dims);
    if (config_.ranks.size() != config_.dims.size())
        throw std::invalid_argument("elimination: ranks must have one entry per mode");
    for (Index j = 0; j < config_.dims.size(); ++j)
        if (config_.ranks[j] < 1 || config_.ranks[j] > config_.dims[j])
            throw std::invalid_argument("elimination: rank exceeds dimension");
    if (!(config_.lambda1 > 0)) throw std::invalid_argument("elimination: lambda1 must be positive");
    if (config_.lambda2 && !(*config_.lambda2 > 0)) throw std::invalid_argument("elimination: lambda2 must be positive");
    if (!(config_.xi_multiplier > 0)) throw std::invalid_argument("elimination: xi multiplier must be positive");
    if (config_.delta && !(*config_.delta > 0 && *config_.delta < 1))
        throw std::invalid_argument("elimination: delta must lie in (0, 1)");
    config_.completion.ranks = config_.ranks;
    p_ = *std::max_element(config_.dims.begin(), config_.dims.end());
    r_ = *std::max_element(config_.ranks.begin(), config_.ranks.end());
    s1_ = initialization_length(p_, r_, config_.dims.size(), config_.init_constant);
    if (config_.horizon < s1_ + 2)
        throw std::invalid_argument("elimination: horizon " + std::to_string(config_.horizon) +
                                    " too short for initialization length " + std::to_string(s1_));
    q_ = leading_block_size(config_.dims, config_.ranks);
}

EliminationPhase TensorElimination::upcoming_phase() const noexcept {
    if (steps_ < s1_) return EliminationPhase::Initialize;
    if (steps_ < s1_ + *n1_) return EliminationPhase::Explore;
    return EliminationPhase::Commit;
}

EliminationStep TensorElimination::next_arm(Rng& rng) {
    const EliminationPhase phase = upcoming_phase();
    if (phase != EliminationPhase::Commit) return {uniform_arm(config_.dims, rng), phase};
    if (active_.empty()) throw ContractViolation("elimination: empty active set");
    Index best = active_.front();
    double best_width = design_->width_sq(best);
    for (Index a : active_) {
        const double w = design_->width_sq(a);
        if (w > best_width) {
            best_width = w;
            best = a;
        }
    }
    return {arm_from_offset(best, config_.dims), phase};
}

void TensorElimination::finish_initialization() {
    const Index upper = config_.horizon - s1_ - 1;
    if (config_.n1) {
        n1_ = std::clamp<Index>(*config_.n1, 1, upper);
        return;
    }
    const Tucker pilot = complete(samples_, config_.dims, config_.completion);
    sigma_hat_.clear();
    for (Index j = 0; j < config_.dims.size(); ++j) {
        Eigen::JacobiSVD<MatrixXd> svd(matricize(pilot.core, j));
        const auto& sv = svd.singularValues();
        sigma_hat_.push_back(std::max(sv[sv.size() - 1], std::numeric_limits<double>::min()));
    }
    n1_ = exploration_length(config_.horizon, p_, r_, config_.dims.size(), sigma_hat_, config_.c0, s1_);
}

void TensorElimination::enter_commit() {
    estimate_ = complete(samples_, config_.dims, config_.completion);
    rotation_ = make_rotation(estimate_->factors);
    budget_ = config_.horizon - s1_ - *n1_;
    const Index big_p = element_count(config_.dims);
    lambda2_ = config_.lambda2 ? *config_.lambda2 : default_lambda2(budget_, q_, config_.lambda1);
    delta_ = config_.delta ? *config_.delta
                           : 1.0 / (static_cast<double>(config_.horizon) * static_cast<double>(big_p));
    const VectorXd beta_plug = rotation_->rotate(tucker_reconstruct(*estimate_));
    const auto q = static_cast<Eigen::Index>(q_);
    xi_ = xi_width(delta_, config_.lambda1, lambda2_, beta_plug.head(q).norm(),
                   beta_plug.tail(beta_plug.size() - q).norm(), config_.xi_multiplier);
    design_.emplace(*rotation_, config_.lambda1, lambda2_);
    active_.resize(big_p);
    std::iota(active_.begin(), active_.end(), Index{0});
    beta_hat_ = VectorXd::Zero(static_cast<Eigen::Index>(big_p));
    phase_ = 0;
    commit_step_ = 0;
    start_phase();
}

void TensorElimination::start_phase() {
    ++phase_;
    auto [start, end] = run_phase_schedule(phase_, budget_);
    // Past the horizon the schedule keeps doubling.
    if (start > end) end = (Index{1} << phase_) - 1;
    phase_end_ = end;
    design_->reset(phase_end_ - commit_step_);
    reward_sums_ = VectorXd::Zero(static_cast<Eigen::Index>(element_count(config_.dims)));
}

void TensorElimination::finish_phase() {
    const VectorXd means = design_->solve(reward_sums_);
    const VectorXd widths = design_->widths_sq().cwiseMax(0.0).cwiseSqrt();
    active_ = eliminate(active_, means, widths, xi_);
    beta_hat_ = rotation_->rotate(DenseTensor(config_.dims, means));
}

void TensorElimination::update(const Arm& arm, double reward, EliminationPhase phase) {
    if (phase != upcoming_phase()) throw std::logic_error("elimination: update phase does not match schedule");
    ++steps_;
    switch (phase) {
        case EliminationPhase::Initialize:
            samples_.push_back({arm, reward});
            if (steps_ == s1_) finish_initialization();
            break;
        case EliminationPhase::Explore:
            samples_.push_back({arm, reward});
            if (steps_ == s1_ + *n1_) enter_commit();
            break;
        case EliminationPhase::Commit: {
            const Index off = flat_offset(arm, config_.dims);
            design_->add(off);
            reward_sums_[static_cast<Eigen::Index>(off)] += reward;
            ++commit_step_;
            if (commit_step_ == phase_end_) {
                finish_phase();
                start_phase();
            }
            break;
        }
    }
}

}  // namespace tb
