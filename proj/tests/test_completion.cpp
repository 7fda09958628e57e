#include "doctest.h"
#include "support.hpp"

#include "tensor_bandits/errors.hpp"

#include <algorithm>

using namespace tbt;

namespace {

// Direct O(T^2) evaluation of the mode-j U-statistic.
MatrixXd u_statistic_naive(const Observations& obs, const Dims& dims, Index mode) {
    const double big_p = static_cast<double>(element_count(dims));
    const double t = static_cast<double>(obs.size());
    const auto pj = static_cast<Eigen::Index>(dims[mode]);
    MatrixXd r = MatrixXd::Zero(pj, pj);
    for (Index a = 0; a < obs.size(); ++a)
        for (Index b = 0; b < obs.size(); ++b) {
            if (a == b) continue;
            bool same_rest = true;
            for (Index l = 0; l < dims.size(); ++l)
                if (l != mode && obs[a].arm[l] != obs[b].arm[l]) same_rest = false;
            if (!same_rest) continue;
            r(static_cast<Eigen::Index>(obs[a].arm[mode]), static_cast<Eigen::Index>(obs[b].arm[mode])) +=
                obs[a].reward * obs[b].reward;
        }
    return r * big_p * big_p / (t * (t - 1.0));
}

double relative_error(const DenseTensor& est, const DenseTensor& truth) {
    return (est.values() - truth.values()).norm() / truth.values().norm();
}

}  // namespace

TEST_CASE("unbiased estimate scales the sample sum") {
    const Dims dims{3, 4, 2};
    Observations obs(7, Observation{Arm{1, 2, 0}, 1.0});
    const DenseTensor x = unbiased_estimate(obs, dims);
    CHECK(x({1, 2, 0}) == doctest::Approx(24.0));
    CHECK(x.values().cwiseAbs().sum() == doctest::Approx(24.0));
}

TEST_CASE("unbiased estimate is unbiased (Monte Carlo)") {
    Rng rng(21);
    Tucker t;
    t.core = DenseTensor::Constant({1, 1, 1}, 5.0);
    for (int j = 0; j < 3; ++j) t.factors.push_back(random_orthonormal(4, 1, rng));
    const DenseTensor truth = tucker_reconstruct(t);
    const int reps = 10000;
    VectorXd sum = VectorXd::Zero(64), sum_sq = VectorXd::Zero(64);
    for (int k = 0; k < reps; ++k) {
        const DenseTensor x = unbiased_estimate(sample_entries(truth, 50, 0.0, rng), truth.dims());
        sum += x.values();
        sum_sq += x.values().cwiseAbs2();
    }
    const VectorXd mean = sum / reps;
    const VectorXd se = ((sum_sq / reps - mean.cwiseAbs2()) / reps).cwiseMax(0.0).cwiseSqrt();
    for (Eigen::Index i = 0; i < 64; ++i) CHECK(std::abs(mean[i] - truth.values()[i]) <= 4.0 * se[i] + 1e-12);
}

TEST_CASE("accumulation-form U-statistic equals the double sum") {
    Rng rng(22);
    const Dims dims{5, 5, 5};
    const DenseTensor truth = tucker_reconstruct(random_tucker(dims, {2, 2, 2}, rng));
    // small box so repeated remaining-index pairs actually occur
    const Dims small{3, 2, 2};
    const DenseTensor truth_small = tucker_reconstruct(random_tucker(small, {2, 2, 2}, rng));
    for (const auto& [x, t] : {std::pair{truth, Index{30}}, std::pair{truth_small, Index{40}}}) {
        const Observations obs = sample_entries(x, t, 0.3, rng);
        for (Index j = 0; j < 3; ++j) {
            const MatrixXd fast = u_statistic(obs, x.dims(), j);
            CHECK(max_abs(fast - u_statistic_naive(obs, x.dims(), j)) <= 1e-10 * std::max(1.0, max_abs(fast)));
            CHECK(max_abs(fast - fast.transpose()) <= 1e-10);
        }
    }
}

TEST_CASE("spectral initialization needs two observations") {
    CompletionOptions opts{{1, 1}};
    Observations one{{Arm{0, 0}, 1.0}};
    CHECK_THROWS_AS(spectral_initialize(one, {2, 2}, opts), InsufficientData);
    CHECK_THROWS_AS(complete(one, {2, 2}, opts), InsufficientData);
    Observations bad{{Arm{0, 0}, 1.0}, {Arm{0, 2}, 1.0}};
    CHECK_THROWS(complete(bad, {2, 2}, opts));
}

TEST_CASE("power iteration") {
    Rng rng(23);
    SUBCASE("exact low-rank input is a fixed point") {
        const Tucker t = random_tucker({6, 5, 4}, {2, 2, 2}, rng);
        const DenseTensor x = tucker_reconstruct(t);
        const PowerIteration pi = power_iterate(x, t.factors, {{2, 2, 2}});
        for (Index j = 0; j < 3; ++j)
            CHECK(max_abs(pi.factors[j] * pi.factors[j].transpose() - t.factors[j] * t.factors[j].transpose()) < 1e-10);
        CHECK(pi.projected_norms.back() == doctest::Approx(pi.projected_norms.front()).epsilon(1e-12));
    }
    SUBCASE("noiseless rank one recovers the factor") {
        Tucker t;
        t.core = DenseTensor::Constant({1, 1, 1}, 3.0);
        for (int j = 0; j < 3; ++j) t.factors.push_back(random_orthonormal(7, 1, rng));
        const DenseTensor x = tucker_reconstruct(t);
        std::vector<MatrixXd> start;
        for (int j = 0; j < 3; ++j) start.push_back(random_orthonormal(7, 1, rng));
        const PowerIteration pi = power_iterate(x, start, {{1, 1, 1}});
        for (Index j = 0; j < 3; ++j) CHECK(std::abs(pi.factors[j].col(0).dot(t.factors[j].col(0))) >= 1.0 - 1e-8);
    }
    SUBCASE("projected norm never decreases") {
        for (int rep = 0; rep < 20; ++rep) {
            const DenseTensor x = random_tensor({5, 6, 4}, rng);
            std::vector<MatrixXd> start{random_orthonormal(5, 2, rng), random_orthonormal(6, 2, rng),
                                        random_orthonormal(4, 2, rng)};
            const PowerIteration pi = power_iterate(x, start, {{2, 2, 2}, 1e-12, 30});
            for (Index k = 1; k < pi.projected_norms.size(); ++k)
                CHECK(pi.projected_norms[k] >= pi.projected_norms[k - 1] - 1e-12);
        }
    }
    SUBCASE("non-orthonormal start is rejected") {
        std::vector<MatrixXd> start{MatrixXd::Ones(3, 1), MatrixXd::Identity(3, 1)};
        CHECK_THROWS_AS(power_iterate(DenseTensor::Zero({3, 3}), start, {{1, 1}}), ContractViolation);
    }
}

TEST_CASE("completion") {
    Rng rng(24);
    SUBCASE("noiseless rank one: factors align and error shrinks with more samples") {
        const Index p = 8;
        const auto t = static_cast<Index>(std::ceil(30.0 * std::pow(p, 1.5)));
        std::vector<double> cosines, err_small, err_large;
        for (int rep = 0; rep < 7; ++rep) {
            Tucker truth_t;
            truth_t.core = DenseTensor::Constant({1, 1, 1}, std::pow(p, 1.5));
            for (int j = 0; j < 3; ++j) truth_t.factors.push_back(random_orthonormal(p, 1, rng));
            const DenseTensor truth = tucker_reconstruct(truth_t);
            const Tucker est = complete(sample_entries(truth, t, 0.0, rng), truth.dims(), {{1, 1, 1}});
            double worst = 1.0;
            for (Index j = 0; j < 3; ++j)
                worst = std::min(worst, std::abs(est.factors[j].col(0).dot(truth_t.factors[j].col(0))));
            cosines.push_back(worst);
            err_small.push_back(relative_error(tucker_reconstruct(est), truth));
            const Tucker more = complete(sample_entries(truth, 4 * t, 0.0, rng), truth.dims(), {{1, 1, 1}});
            err_large.push_back(relative_error(tucker_reconstruct(more), truth));
        }
        std::sort(cosines.begin(), cosines.end());
        std::sort(err_small.begin(), err_small.end());
        std::sort(err_large.begin(), err_large.end());
        CHECK(cosines[3] >= 0.95);
        CHECK(err_large[3] < 0.75 * err_small[3]);
    }
    SUBCASE("zero rewards give a zero core") {
        Observations obs;
        for (int k = 0; k < 20; ++k) obs.push_back({uniform_arm({4, 4, 4}, rng), 0.0});
        const Tucker est = complete(obs, {4, 4, 4}, {{2, 2, 2}});
        CHECK(est.core.values().isZero(0));
        for (const auto& u : est.factors) CHECK(orthonormality_defect(u) < 1e-10);
    }
    SUBCASE("linear in the rewards") {
        const DenseTensor truth = tucker_reconstruct(random_tucker({5, 5, 5}, {2, 2, 2}, rng));
        Observations obs = sample_entries(truth, 200, 0.1, rng);
        // one sweep, since the stopping rule uses an absolute tolerance
        const CompletionOptions opts{{2, 2, 2}, 1e-6, 1};
        const DenseTensor a = tucker_reconstruct(complete(obs, truth.dims(), opts));
        for (auto& o : obs) o.reward *= -3.0;
        const DenseTensor b = tucker_reconstruct(complete(obs, truth.dims(), opts));
        CHECK((b.values() + 3.0 * a.values()).cwiseAbs().maxCoeff() < 1e-8 * a.values().cwiseAbs().maxCoeff());
    }
}
