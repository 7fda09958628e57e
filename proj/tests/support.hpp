#pragma once

#include "tensor_bandits/completion.hpp"
#include "tensor_bandits/random.hpp"

namespace tbt {

using namespace tb;

inline DenseTensor random_tensor(const Dims& dims, Rng& rng) {
    DenseTensor x(dims);
    for (Index k = 0; k < x.size(); ++k) x[k] = standard_normal(rng);
    return x;
}

inline MatrixXd random_matrix(Index rows, Index cols, Rng& rng) {
    MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = standard_normal(rng);
    return m;
}

inline MatrixXd random_orthonormal(Index p, Index r, Rng& rng) {
    Eigen::HouseholderQR<MatrixXd> qr(random_matrix(p, r, rng));
    return qr.householderQ() * MatrixXd::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(r));
}

inline Tucker random_tucker(const Dims& dims, const Dims& ranks, Rng& rng) {
    Tucker t;
    t.core = random_tensor(ranks, rng);
    for (Index j = 0; j < dims.size(); ++j) t.factors.push_back(random_orthonormal(dims[j], ranks[j], rng));
    return t;
}

inline Observations sample_entries(const DenseTensor& x, Index count, double noise, Rng& rng) {
    Observations obs;
    for (Index t = 0; t < count; ++t) {
        Arm a = uniform_arm(x.dims(), rng);
        const double y = x(a) + noise * standard_normal(rng);
        obs.push_back({std::move(a), y});
    }
    return obs;
}

inline double max_abs(const MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace tbt
