#include "doctest.h"
#include "support.hpp"

#include "tensor_bandits/elimination.hpp"
#include "tensor_bandits/environment.hpp"

#include <algorithm>

using namespace tbt;

namespace {

std::vector<MatrixXd> random_factors(const Dims& dims, const Dims& ranks, Rng& rng) {
    std::vector<MatrixXd> f;
    for (Index j = 0; j < dims.size(); ++j) f.push_back(random_orthonormal(dims[j], ranks[j], rng));
    return f;
}

}  // namespace

TEST_CASE("confidence width") {
    CHECK(xi_width(2.0 * std::exp(-14.0), 0.1, 1.0, 0.0, 0.0, 1.0) == doctest::Approx(28.0).epsilon(1e-12));
    const double base = xi_width(0.05, 0.1, 100.0, 3.0, 0.01, 1.0);
    CHECK(base == doctest::Approx(2.0 * std::sqrt(14.0 * std::log(40.0)) + std::sqrt(0.1) * 3.0 + 10.0 * 0.01)
                      .epsilon(1e-12));
    CHECK(xi_width(0.05, 0.1, 100.0, 3.0, 0.01, 0.05) == doctest::Approx(0.05 * base).epsilon(1e-14));
    CHECK_THROWS_AS(xi_width(1.0, 0.1, 1.0, 0.0, 0.0, 1.0), std::domain_error);
    CHECK_THROWS_AS(xi_width(0.0, 0.1, 1.0, 0.0, 0.0, 1.0), std::domain_error);
    CHECK(default_lambda2(1000, 10, 0.1) == doctest::Approx(1000.0 / (10.0 * std::log(1.0 + 10000.0))));
}

TEST_CASE("exploration length") {
    const std::vector<double> sigma(3, 29.05);
    const double by_hand = std::pow(1e4, 0.4) * 8.0 / std::pow(29.05, 3) * std::pow(15.0, 6.0) *
                           std::pow(std::log(15.0), 1.5);
    const double c0 = 1e-3;
    CHECK(exploration_length(10000, 15, 2, 3, sigma, c0, 83) == static_cast<Index>(std::ceil(c0 * by_hand)));
    CHECK(exploration_length(10000, 15, 2, 3, sigma, 1.0, 83) == 10000 - 83 - 1);
    const Index full = exploration_length(10000, 15, 2, 3, sigma, 2e-4, 83);
    const Index half = exploration_length(10000, 15, 2, 3, sigma, 1e-4, 83);
    CHECK(half == static_cast<Index>(std::ceil(1e-4 * by_hand)));
    CHECK((half == full / 2 || half == (full + 1) / 2));
    CHECK(exploration_length(10000, 15, 2, 3, sigma, 1e-30, 83) == 1);
    CHECK_THROWS_AS(exploration_length(10000, 15, 2, 3, {29.05, 0.0, 29.05}, c0, 83), std::domain_error);
}

TEST_CASE("ridge estimate") {
    CHECK(ridge_blocked({}, 3, 0.1, 1.0, 8) == VectorXd::Zero(8));

    VectorXd e1 = VectorXd::Zero(5);
    e1[0] = 1.0;
    const VectorXd one = ridge_blocked({{e1, 2.5}}, 2, 0.1, 7.0);
    CHECK(one[0] == doctest::Approx(2.5 / 1.1));
    CHECK(one.tail(4).isZero(0));

    Rng rng(31);
    for (int rep = 0; rep < 20; ++rep) {
        const Index dim = 16, q = 7;
        std::vector<std::pair<VectorXd, double>> hist;
        MatrixXd a(30, 16);
        VectorXd y(30);
        for (int t = 0; t < 30; ++t) {
            a.row(t) = random_matrix(1, dim, rng);
            y[t] = standard_normal(rng);
            hist.emplace_back(a.row(t).transpose(), y[t]);
        }
        MatrixXd normal = a.transpose() * a;
        for (Index k = 0; k < dim; ++k) normal(k, k) += k < q ? 0.1 : 3.0;
        const VectorXd dense = normal.fullPivLu().solve(a.transpose() * y);
        CHECK(max_abs(ridge_blocked(hist, q, 0.1, 3.0) - dense) <= 1e-8);
    }
}

TEST_CASE("phase schedule") {
    CHECK(run_phase_schedule(1, 100) == std::pair<Index, Index>{1, 1});
    CHECK(run_phase_schedule(4, 100) == std::pair<Index, Index>{8, 15});
    CHECK(run_phase_schedule(7, 100) == std::pair<Index, Index>{64, 100});
    const auto [start, end] = run_phase_schedule(8, 100);
    CHECK(start > end);
}

TEST_CASE("rotated actions") {
    Rng rng(32);
    SUBCASE("identity rotation") {
        const RotatedActions ra = build_rotated_actions({MatrixXd::Identity(2, 1), MatrixXd::Identity(2, 1)});
        CHECK(ra.q == 3);
        CHECK(ra.actions.row(0)[0] == doctest::Approx(1.0));
        CHECK(ra.actions.row(0).tail(3).isZero(1e-15));
    }
    SUBCASE("unit norms, orthogonality and fidelity") {
        for (int rep = 0; rep < 100; ++rep) {
            const Index d = 2 + rep % 2;
            Dims dims, ranks;
            for (Index j = 0; j < d; ++j) {
                dims.push_back(2 + uniform_index(3, rng));
                ranks.push_back(1 + uniform_index(dims.back(), rng));
            }
            const auto factors = random_factors(dims, ranks, rng);
            const RotatedActions ra = build_rotated_actions(factors);
            CHECK(ra.q == leading_block_size(dims, ranks));
            CHECK((ra.actions.rowwise().norm().array() - 1.0).abs().maxCoeff() <= 1e-10);
            const auto n = ra.actions.rows();
            CHECK(max_abs(ra.actions * ra.actions.transpose() - MatrixXd::Identity(n, n)) <= 1e-10);

            const DenseTensor x = random_tensor(dims, rng);
            const Rotation rot = make_rotation(factors);
            const VectorXd y = rot.rotate(x);
            for (Index k = 0; k < x.size(); ++k)
                CHECK(std::abs(rot.action(arm_from_offset(k, dims)).dot(y) - x[k]) <= 1e-8);
        }
    }
}

TEST_CASE("design inverse in arm coordinates") {
    Rng rng(33);
    const Dims dims{3, 4, 3}, ranks{1, 2, 1};
    const auto factors = random_factors(dims, ranks, rng);
    const Rotation rot = make_rotation(factors);
    const RotatedActions ra = build_rotated_actions(factors);
    const double l1 = 0.1, l2 = 4.0;
    ArmDesign design(rot, l1, l2);
    design.reset(16);

    const auto big_p = ra.actions.rows();
    MatrixXd v = MatrixXd::Zero(big_p, big_p);
    for (Eigen::Index k = 0; k < big_p; ++k) v(k, k) = k < static_cast<Eigen::Index>(ra.q) ? l1 : l2;
    CHECK(max_abs(design.inverse_dense(ra) - v.inverse()) <= 1e-10);

    VectorXd z = VectorXd::Zero(big_p);
    for (int t = 0; t < 100; ++t) {
        const Index arm = uniform_index(static_cast<Index>(big_p), rng);
        design.add(arm);
        v += ra.actions.row(static_cast<Eigen::Index>(arm)).transpose() * ra.actions.row(static_cast<Eigen::Index>(arm));
        z[static_cast<Eigen::Index>(arm)] += standard_normal(rng);
    }
    CHECK(design.pulls() == 100);
    const MatrixXd v_inv = v.inverse();
    CHECK(max_abs(design.inverse_dense(ra) - v_inv) <= 1e-8);
    const MatrixXd arm_inv = ra.actions * v_inv * ra.actions.transpose();
    CHECK(max_abs(design.widths_sq() - arm_inv.diagonal()) <= 1e-8);
    CHECK(max_abs(design.solve(z) - arm_inv * z) <= 1e-8);

    const Eigen::SelfAdjointEigenSolver<MatrixXd> es(v);
    CHECK(es.eigenvalues().minCoeff() >= std::min(l1, l2) - 1e-10);

    design.reset(4);
    CHECK(design.pulls() == 0);
    CHECK(max_abs(design.inverse_dense(ra) - v.inverse()) > 1e-3);
}

TEST_CASE("elimination rule") {
    Rng rng(34);
    std::vector<Index> all(12);
    std::iota(all.begin(), all.end(), Index{0});
    for (int rep = 0; rep < 50; ++rep) {
        VectorXd means(12), widths(12);
        for (int k = 0; k < 12; ++k) {
            means[k] = standard_normal(rng);
            widths[k] = 0.2 * std::abs(standard_normal(rng));
        }
        means[rep % 12] += 3.0;
        const double xi = 0.5 + rep % 3;
        double max_lcb = -1e300;
        for (Index a : all) max_lcb = std::max(max_lcb, means[a] - widths[a] * xi);
        std::vector<Index> expect;
        for (Index a : all)
            if (means[a] + widths[a] * xi >= max_lcb) expect.push_back(a);
        CHECK(eliminate(all, means, widths, xi) == expect);

        CHECK(eliminate(all, means, widths, 1e12) == all);
        Eigen::Index top = 0;
        means.maxCoeff(&top);
        CHECK(eliminate(all, means, widths, 0.0) == std::vector<Index>{static_cast<Index>(top)});
    }
    CHECK_THROWS_AS(eliminate({}, VectorXd(), VectorXd(), 1.0), ContractViolation);
}

TEST_CASE("max-width selection") {
    const Dims dims{2, 2};
    const auto factors = std::vector<MatrixXd>{MatrixXd::Identity(2, 1), MatrixXd::Identity(2, 1)};
    ArmDesign design(make_rotation(factors), 1.0, 1.0);
    design.reset(50);
    for (int t = 0; t < 10; ++t) design.add(0);
    Eigen::Index arg = 0;
    design.widths_sq().maxCoeff(&arg);
    CHECK(arg != 0);
    CHECK(design.width_sq(0) == doctest::Approx(1.0 / 11.0));
}

TEST_CASE("noiseless policy keeps the oracle arm") {
    EliminationConfig cfg;
    cfg.dims = {5, 5, 5};
    cfg.ranks = {1, 1, 1};
    cfg.horizon = 6000;
    cfg.n1 = 100;
    cfg.xi_multiplier = 0.1;
    const Environment env = synth_env(5, 1, 1.0, 0.0, 0, 35);
    const Index best = flat_offset(oracle(env).arm, env.dims());
    TensorElimination policy(cfg);
    Rng rng(36);
    Index prev_active = element_count(cfg.dims) + 1;
    for (Index t = 0; t < cfg.horizon; ++t) {
        const EliminationStep s = policy.next_arm(rng);
        policy.update(s.arm, pull(env, s.arm, rng), s.phase);
        if (policy.upcoming_phase() == EliminationPhase::Commit) {
            const auto& act = policy.active();
            REQUIRE(!act.empty());
            CHECK(std::is_sorted(act.begin(), act.end()));
            CHECK(act.size() <= prev_active);
            CHECK(std::binary_search(act.begin(), act.end(), best));
            prev_active = act.size();
        }
    }
    CHECK(policy.n1() == Index{100});
    CHECK(policy.q() == 125 - 64);
    CHECK(prev_active < 10);
}
