#pragma once

// Tensor elimination: uniform exploration, low-rank completion, rotation of
// every arm into the basis [U_j ; U_j_perp], then phased max-width sampling
// with confidence-interval elimination on the rotated linear bandit.
//
// The rotated arm vectors for all arms form an orthogonal matrix A (rows are
// arms).  Working with M = A V A^T instead of the P x P design V turns every
// pull into a rank-one update on a unit vector and makes both the widths
// ||a||_{V^-1}^2 = (M^-1)_{aa} and the fitted means <beta_hat, a> = (M^-1 z)_a
// directly available, where z holds the per-arm reward sums of the phase.

#include "tensor_bandits/completion.hpp"
#include "tensor_bandits/random.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace tb {

enum class EliminationPhase { Initialize, Explore, Commit };

const char* to_string(EliminationPhase phase);

/// ceil(c0 * n^(2/(d+2)) * r^d / prod(sigma) * p^((d^2+d)/2) * log(p)^(d/2)),
/// clamped to [1, n - s1 - 1].
Index exploration_length(Index n, Index p, Index r, Index d, const std::vector<double>& sigma_min,
                         double c0, Index s1);

/// 2 sqrt(14 log(2/delta)) + sqrt(lambda1) |beta_head| + sqrt(lambda2) |beta_tail|, times c.
double xi_width(double delta, double lambda1, double lambda2, double norm_head, double norm_tail,
                double c);

/// Lemma-style default lambda2 = N / (q log(1 + N / lambda1)).
double default_lambda2(Index budget, Index q, double lambda1);

/// Ridge estimate (sum a a^T + Lambda)^-1 sum y a with Lambda = diag(lambda1 x q, lambda2 x rest).
/// `dim` is only consulted when the history is empty (the result is then zero).
VectorXd ridge_blocked(const std::vector<std::pair<VectorXd, double>>& history, Index q,
                       double lambda1, double lambda2, Index dim = 0);

/// Commit-step window [start, end] (1-based, inclusive) of phase k >= 1:
/// [2^(k-1), min(2^k - 1, budget)].  start > end means the phase is empty.
std::pair<Index, Index> run_phase_schedule(Index k, Index budget);

/// Per-mode rotation [U_j ; U_j_perp] built from estimated factors.
struct Rotation {
    std::vector<MatrixXd> bases;
    Dims ranks;

    Dims dims() const;
    /// Rotated, blocked action vector of one arm.
    VectorXd action(const Arm& arm) const;
    /// beta = vec_blocked(x rotated into the basis).
    VectorXd rotate(const DenseTensor& x) const;
};

Rotation make_rotation(const std::vector<MatrixXd>& factors);

struct RotatedActions {
    /// Row k is the action vector of the arm at flat offset k.
    MatrixXd actions;
    Index q = 0;
};

/// Materializes every action vector; intended for small problems and checks.
RotatedActions build_rotated_actions(const std::vector<MatrixXd>& factors);

/// Surviving indices of the elimination rule: keep a iff
/// mean_a + width_a xi >= max_b (mean_b - width_b xi).  The arm with the
/// largest upper bound is always retained.
std::vector<Index> eliminate(const std::vector<Index>& active, const VectorXd& means,
                             const VectorXd& widths, double xi);

/// Inverse design in arm coordinates, maintained as M0^-1 - G G^T.
class ArmDesign {
public:
    ArmDesign(const Rotation& rotation, double lambda1, double lambda2);

    /// Back to V = Lambda; `capacity` bounds the number of pulls before the next reset.
    void reset(Index capacity);
    void add(Index arm_offset);

    double width_sq(Index arm_offset) const { return diag_[static_cast<Eigen::Index>(arm_offset)]; }
    const VectorXd& widths_sq() const noexcept { return diag_; }
    Index pulls() const noexcept { return used_; }

    /// M^-1 z
    VectorXd solve(const VectorXd& z) const;
    /// Column of M0^-1, i.e. Lambda^-1 seen from arm coordinates.
    VectorXd base_column(Index arm_offset) const;
    VectorXd apply_base(const VectorXd& z) const;
    /// V^-1 in rotated coordinates (A^T M^-1 A); dense, small problems only.
    MatrixXd inverse_dense(const RotatedActions& actions) const;

private:
    Dims dims_;
    std::vector<MatrixXd> perp_projectors_;
    double inv_l1_;
    double inv_l2_;
    VectorXd diag_;
    VectorXd base_diag_;
    MatrixXd g_;
    Index used_ = 0;
};

struct EliminationConfig {
    Dims dims;
    Dims ranks;
    Index horizon = 0;
    double init_constant = 1.0;
    /// Multiplier on the theoretical exploration length.
    double c0 = 0.5;
    /// Explicit exploration length; overrides the theoretical formula.
    std::optional<Index> n1;
    double lambda1 = 0.1;
    std::optional<double> lambda2;
    double xi_multiplier = 1.0;
    std::optional<double> delta;
    CompletionOptions completion;
};

struct EliminationStep {
    Arm arm;
    EliminationPhase phase;
};

class TensorElimination {
public:
    explicit TensorElimination(EliminationConfig config);

    EliminationStep next_arm(Rng& rng);
    void update(const Arm& arm, double reward, EliminationPhase phase);

    Index s1() const noexcept { return s1_; }
    std::optional<Index> n1() const noexcept { return n1_; }
    Index steps() const noexcept { return steps_; }
    Index phase_index() const noexcept { return phase_; }
    Index q() const noexcept { return q_; }
    double xi() const noexcept { return xi_; }
    double lambda2() const noexcept { return lambda2_; }
    const std::vector<double>& sigma_estimate() const noexcept { return sigma_hat_; }
    /// Active arms as flat offsets, ascending.
    const std::vector<Index>& active() const noexcept { return active_; }
    const std::optional<Rotation>& rotation() const noexcept { return rotation_; }
    const std::optional<Tucker>& estimate() const noexcept { return estimate_; }
    /// beta_hat of the last finished phase in rotated coordinates.
    const VectorXd& beta_hat() const noexcept { return beta_hat_; }
    const ArmDesign* design() const noexcept { return design_ ? &*design_ : nullptr; }

    EliminationPhase upcoming_phase() const noexcept;

private:
    void finish_initialization();
    void enter_commit();
    void start_phase();
    void finish_phase();

    EliminationConfig config_;
    Index p_ = 0;
    Index r_ = 0;
    Index s1_ = 0;
    std::optional<Index> n1_;
    Index q_ = 0;
    Index budget_ = 0;
    double lambda2_ = 0.0;
    double delta_ = 0.0;
    double xi_ = 0.0;
    std::vector<double> sigma_hat_;

    Index steps_ = 0;
    Observations samples_;
    std::optional<Tucker> estimate_;
    std::optional<Rotation> rotation_;
    std::optional<ArmDesign> design_;

    Index phase_ = 0;
    Index phase_end_ = 0;
    Index commit_step_ = 0;
    VectorXd reward_sums_;
    std::vector<Index> active_;
    VectorXd beta_hat_;
};

}  // namespace tb
