#pragma once

// Dense order-d tensors and the handful of multilinear operations the bandit
// policies need.  Storage is row-major with the last index varying fastest,
// so offset(i_1..i_d) = sum_j i_j * prod_{l>j} p_l.  All indices in this
// library are 0-based; the text formats written by the tools are 1-based.

#include "tensor_bandits/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace tb {

using Index = std::size_t;
using Dims = std::vector<Index>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// One entry of the reward tensor, i.e. a d-tuple of 0-based mode indices.
struct Arm {
    std::vector<Index> index;

    Arm() = default;
    explicit Arm(std::vector<Index> idx) : index(std::move(idx)) {}
    Arm(std::initializer_list<Index> idx) : index(idx) {}

    Index order() const noexcept { return index.size(); }
    Index operator[](Index j) const { return index[j]; }

    friend bool operator==(const Arm&, const Arm&) = default;
    friend auto operator<=>(const Arm&, const Arm&) = default;
};

/// The first d0 coordinates of an arm, chosen by the environment.
using Context = std::vector<Index>;

inline Index element_count(const Dims& dims) {
    return std::accumulate(dims.begin(), dims.end(), Index{1}, std::multiplies<>());
}

inline void check_dims(const Dims& dims) {
    if (dims.empty()) throw std::invalid_argument("tensor order must be at least 1");
    for (Index p : dims)
        if (p == 0) throw std::invalid_argument("tensor dimensions must be positive");
}

inline Index flat_offset(const Arm& arm, const Dims& dims) {
    if (arm.order() != dims.size())
        throw std::out_of_range("arm order " + std::to_string(arm.order()) +
                                " does not match tensor order " + std::to_string(dims.size()));
    Index offset = 0;
    for (Index j = 0; j < dims.size(); ++j) {
        if (arm[j] >= dims[j])
            throw std::out_of_range("arm index " + std::to_string(arm[j]) + " out of range for mode " +
                                    std::to_string(j) + " of size " + std::to_string(dims[j]));
        offset = offset * dims[j] + arm[j];
    }
    return offset;
}

inline Arm arm_from_offset(Index offset, const Dims& dims) {
    if (offset >= element_count(dims)) throw std::out_of_range("flat offset out of range");
    Arm arm;
    arm.index.resize(dims.size());
    for (Index j = dims.size(); j-- > 0;) {
        arm.index[j] = offset % dims[j];
        offset /= dims[j];
    }
    return arm;
}

template <typename Scalar>
class Tensor {
public:
    using Scalar_t = Scalar;
    using Values = Vector<Scalar>;

    Tensor() = default;

    explicit Tensor(Dims dims) : dims_(std::move(dims)) {
        check_dims(dims_);
        values_ = Values::Zero(static_cast<Eigen::Index>(element_count(dims_)));
    }

    Tensor(Dims dims, Values values) : dims_(std::move(dims)), values_(std::move(values)) {
        check_dims(dims_);
        if (static_cast<Index>(values_.size()) != element_count(dims_))
            throw std::invalid_argument("value count " + std::to_string(values_.size()) +
                                        " does not match dims product " +
                                        std::to_string(element_count(dims_)));
    }

    static Tensor Zero(Dims dims) { return Tensor(std::move(dims)); }

    static Tensor Constant(Dims dims, Scalar value) {
        Tensor t(std::move(dims));
        t.values_.setConstant(value);
        return t;
    }

    const Dims& dims() const noexcept { return dims_; }
    Index dim(Index mode) const { return dims_.at(mode); }
    Index order() const noexcept { return dims_.size(); }
    Index size() const noexcept { return static_cast<Index>(values_.size()); }

    const Values& values() const noexcept { return values_; }
    Values& values() noexcept { return values_; }

    Scalar operator[](Index offset) const { return values_[static_cast<Eigen::Index>(offset)]; }
    Scalar& operator[](Index offset) { return values_[static_cast<Eigen::Index>(offset)]; }

    Scalar operator()(const Arm& arm) const { return (*this)[flat_offset(arm, dims_)]; }
    Scalar& operator()(const Arm& arm) { return (*this)[flat_offset(arm, dims_)]; }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.dims_ == b.dims_ && a.values_ == b.values_;
    }

private:
    Dims dims_;
    Values values_;
};

using DenseTensor = Tensor<double>;
using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

namespace detail {

// A tensor viewed around one mode as (outer, p_mode, inner), with
// outer = prod_{l<mode} p_l and inner = prod_{l>mode} p_l.
struct ModeSplit {
    Index outer = 1;
    Index extent = 1;
    Index inner = 1;
};

inline ModeSplit split_at(const Dims& dims, Index mode) {
    if (mode >= dims.size())
        throw std::out_of_range("mode " + std::to_string(mode) + " out of range for order " +
                                std::to_string(dims.size()));
    ModeSplit s;
    for (Index l = 0; l < mode; ++l) s.outer *= dims[l];
    s.extent = dims[mode];
    for (Index l = mode + 1; l < dims.size(); ++l) s.inner *= dims[l];
    return s;
}

template <typename Scalar>
using RowMajorMap =
    Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename Scalar>
using ConstRowMajorMap =
    Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

}  // namespace detail

/// Mode-j unfolding.  Row index is i_mode; the column index enumerates the
/// remaining indices in their original order with the last varying fastest,
/// which for mode 0 of an order-3 tensor gives column i_2 * p_3 + i_3.
template <typename Scalar>
Matrix<Scalar> matricize(const Tensor<Scalar>& x, Index mode) {
    const auto s = detail::split_at(x.dims(), mode);
    Matrix<Scalar> m(s.extent, s.outer * s.inner);
    for (Index o = 0; o < s.outer; ++o) {
        detail::ConstRowMajorMap<Scalar> block(x.values().data() + o * s.extent * s.inner,
                                               s.extent, s.inner);
        m.middleCols(o * s.inner, s.inner) = block;
    }
    return m;
}

template <typename Scalar>
Tensor<Scalar> dematricize(const Matrix<Scalar>& m, Index mode, const Dims& dims) {
    check_dims(dims);
    const auto s = detail::split_at(dims, mode);
    if (static_cast<Index>(m.rows()) != s.extent || static_cast<Index>(m.cols()) != s.outer * s.inner)
        throw std::invalid_argument("matrix shape does not match dims for mode " + std::to_string(mode));
    Tensor<Scalar> x(dims);
    for (Index o = 0; o < s.outer; ++o) {
        detail::RowMajorMap<Scalar> block(x.values().data() + o * s.extent * s.inner, s.extent,
                                          s.inner);
        block = m.middleCols(o * s.inner, s.inner);
    }
    return x;
}

/// x ×_mode y: contracts mode `mode` of x against the columns of y, so the
/// result has dims[mode] replaced by y.rows().
template <typename Scalar, typename Derived>
Tensor<Scalar> marginal_multiply(const Tensor<Scalar>& x, const Eigen::MatrixBase<Derived>& y,
                                 Index mode) {
    const auto s = detail::split_at(x.dims(), mode);
    if (static_cast<Index>(y.cols()) != s.extent)
        throw std::invalid_argument("marginal_multiply: matrix has " + std::to_string(y.cols()) +
                                    " columns, mode " + std::to_string(mode) + " has size " +
                                    std::to_string(s.extent));
    Dims out_dims = x.dims();
    out_dims[mode] = static_cast<Index>(y.rows());
    Tensor<Scalar> out(out_dims);
    const Matrix<Scalar> ye = y;
    for (Index o = 0; o < s.outer; ++o) {
        detail::ConstRowMajorMap<Scalar> in(x.values().data() + o * s.extent * s.inner, s.extent,
                                            s.inner);
        detail::RowMajorMap<Scalar> res(out.values().data() + o * out_dims[mode] * s.inner,
                                        out_dims[mode], s.inner);
        res.noalias() = ye * in;
    }
    return out;
}

/// x ×_1 U_1^T ×_2 ... ×_d U_d^T.
template <typename Scalar>
Tensor<Scalar> project(const Tensor<Scalar>& x, const std::vector<Matrix<Scalar>>& factors) {
    if (factors.size() != x.order())
        throw std::invalid_argument("project: need one factor per mode");
    Tensor<Scalar> out = x;
    for (Index j = 0; j < factors.size(); ++j) out = marginal_multiply(out, factors[j].transpose(), j);
    return out;
}

template <typename Scalar>
Scalar inner_product(const Tensor<Scalar>& x, const Tensor<Scalar>& y) {
    if (x.dims() != y.dims()) throw std::invalid_argument("inner_product: dims mismatch");
    return x.values().dot(y.values());
}

template <typename Scalar>
struct Norms {
    Scalar frobenius;
    Scalar max_abs;
};

template <typename Scalar>
Norms<Scalar> norms(const Tensor<Scalar>& x) {
    if (x.size() == 0) return {Scalar(0), Scalar(0)};
    return {x.values().norm(), x.values().cwiseAbs().maxCoeff()};
}

template <typename Scalar>
Tensor<Scalar> indicator(const Arm& arm, const Dims& dims) {
    Tensor<Scalar> e(dims);
    e[flat_offset(arm, dims)] = Scalar(1);
    return e;
}

/// Core plus one p_j x r_j factor per mode.
template <typename Scalar>
struct TuckerDecomp {
    Tensor<Scalar> core;
    std::vector<Matrix<Scalar>> factors;

    Dims dims() const {
        Dims d;
        for (const auto& f : factors) d.push_back(static_cast<Index>(f.rows()));
        return d;
    }
    Dims ranks() const { return core.dims(); }
};

using Tucker = TuckerDecomp<double>;

/// core ×_1 U_1 ×_2 ... ×_d U_d
template <typename Scalar>
Tensor<Scalar> tucker_reconstruct(const TuckerDecomp<Scalar>& t) {
    if (t.factors.size() != t.core.order())
        throw std::invalid_argument("tucker_reconstruct: factor count does not match core order");
    Tensor<Scalar> out = t.core;
    for (Index j = 0; j < t.factors.size(); ++j) {
        if (static_cast<Index>(t.factors[j].cols()) != t.core.dim(j))
            throw std::invalid_argument("tucker_reconstruct: factor " + std::to_string(j) +
                                        " has wrong column count");
        out = marginal_multiply(out, t.factors[j], j);
    }
    return out;
}

/// Flip each column so its largest-magnitude entry is positive.
template <typename Derived>
void fix_column_signs(Eigen::MatrixBase<Derived>& u) {
    for (Eigen::Index c = 0; c < u.cols(); ++c) {
        Eigen::Index arg = 0;
        u.col(c).cwiseAbs().maxCoeff(&arg);
        if (u(arg, c) < 0) u.col(c) *= -1;
    }
}

/// Top-r left singular vectors of m, sign-normalized.
template <typename Scalar>
Matrix<Scalar> truncated_svd_left(const Matrix<Scalar>& m, Index r) {
    const Index k = static_cast<Index>(std::min(m.rows(), m.cols()));
    if (r < 1 || r > k)
        throw std::out_of_range("truncated_svd_left: rank " + std::to_string(r) + " outside [1, " +
                                std::to_string(k) + "]");
    Eigen::BDCSVD<Matrix<Scalar>> svd(m, Eigen::ComputeThinU);
    if (svd.info() != Eigen::Success) throw NumericError("SVD did not converge");
    Matrix<Scalar> u = svd.matrixU().leftCols(static_cast<Eigen::Index>(r));
    fix_column_signs(u);
    return u;
}

template <typename Scalar>
Scalar orthonormality_defect(const Matrix<Scalar>& u) {
    if (u.cols() == 0) return Scalar(0);
    return (u.transpose() * u - Matrix<Scalar>::Identity(u.cols(), u.cols())).cwiseAbs().maxCoeff();
}

/// Orthonormal basis of the complement of span(u); p x (p - r), possibly empty.
template <typename Scalar>
Matrix<Scalar> orthonormal_complement(const Matrix<Scalar>& u, Scalar tol = Scalar(1e-8)) {
    if (u.cols() > u.rows()) throw ContractViolation("orthonormal_complement: more columns than rows");
    if (orthonormality_defect(u) > tol)
        throw ContractViolation("orthonormal_complement: input columns are not orthonormal");
    const Eigen::Index p = u.rows();
    const Eigen::Index r = u.cols();
    if (r == p) return Matrix<Scalar>(p, 0);
    Matrix<Scalar> q = Matrix<Scalar>::Identity(p, p);
    if (r > 0) {
        Eigen::HouseholderQR<Matrix<Scalar>> qr(u);
        q = qr.householderQ() * Matrix<Scalar>::Identity(p, p);
    }
    Matrix<Scalar> c = q.rightCols(p - r);
    fix_column_signs(c);
    return c;
}

/// The rotation [U ; U_perp] as a square orthogonal matrix.
template <typename Scalar>
Matrix<Scalar> complete_basis(const Matrix<Scalar>& u) {
    Matrix<Scalar> w(u.rows(), u.rows());
    w << u, orthonormal_complement(u);
    return w;
}

/// Blocked vectorization order.  Entry k of the result is the flat offset
/// placed at blocked position k: first every index with all i_j < r_j, then
/// the mixed indices (some i_j < r_j, some not), then the all-complement
/// block with every i_j >= r_j.  Each group keeps canonical order.  The
/// first prod(p) - prod(p - r) positions are therefore exactly the entries
/// touched by at least one leading subspace.
inline std::vector<Index> blocked_order(const Dims& dims, const Dims& ranks) {
    check_dims(dims);
    if (ranks.size() != dims.size()) throw std::invalid_argument("blocked_order: ranks/dims order mismatch");
    for (Index j = 0; j < dims.size(); ++j)
        if (ranks[j] > dims[j])
            throw std::invalid_argument("blocked_order: rank " + std::to_string(ranks[j]) +
                                        " exceeds dim " + std::to_string(dims[j]));
    const Index n = element_count(dims);
    std::vector<Index> lead, mixed, tail;
    std::vector<Index> idx(dims.size(), 0);
    for (Index off = 0; off < n; ++off) {
        Index below = 0;
        for (Index j = 0; j < dims.size(); ++j) below += idx[j] < ranks[j] ? 1 : 0;
        if (below == dims.size())
            lead.push_back(off);
        else if (below == 0)
            tail.push_back(off);
        else
            mixed.push_back(off);
        for (Index j = dims.size(); j-- > 0;) {
            if (++idx[j] < dims[j]) break;
            idx[j] = 0;
        }
    }
    lead.insert(lead.end(), mixed.begin(), mixed.end());
    lead.insert(lead.end(), tail.begin(), tail.end());
    return lead;
}

/// Number of leading blocked positions: prod(p) - prod(p - r).
inline Index leading_block_size(const Dims& dims, const Dims& ranks) {
    Index tail = 1;
    for (Index j = 0; j < dims.size(); ++j) tail *= dims[j] - ranks[j];
    return element_count(dims) - tail;
}

template <typename Scalar>
Vector<Scalar> vectorize_blocked(const Tensor<Scalar>& y, const Dims& ranks) {
    const auto order = blocked_order(y.dims(), ranks);
    Vector<Scalar> v(static_cast<Eigen::Index>(order.size()));
    for (Index k = 0; k < order.size(); ++k) v[static_cast<Eigen::Index>(k)] = y[order[k]];
    return v;
}

// ---- text format: "dims: p1 ... pd" then prod(p) reals in canonical order ----

template <typename Scalar>
void write_tensor(std::ostream& os, const Tensor<Scalar>& x) {
    os << "dims:";
    for (Index p : x.dims()) os << ' ' << p;
    os << '\n';
    const auto old_precision = os.precision(std::numeric_limits<Scalar>::max_digits10);
    const Index row = x.dims().back();
    for (Index k = 0; k < x.size(); ++k) {
        os << x[k];
        os << (((k + 1) % row == 0) ? '\n' : ' ');
    }
    os.precision(old_precision);
}

template <typename Scalar = double>
Tensor<Scalar> read_tensor(std::istream& is) {
    std::string line;
    std::size_t line_no = 0;
    // skip leading blank lines
    while (std::getline(is, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") != std::string::npos) break;
    }
    if (line_no == 0 || line.find_first_not_of(" \t\r") == std::string::npos)
        throw ParseError(line_no == 0 ? 1 : line_no, "missing 'dims:' header");
    std::istringstream header(line);
    std::string tag;
    header >> tag;
    if (tag != "dims:") throw ParseError(line_no, "expected 'dims:' header, found '" + tag + "'");
    Dims dims;
    std::string tok;
    while (header >> tok) {
        std::size_t used = 0;
        long long v = 0;
        try {
            v = std::stoll(tok, &used);
        } catch (const std::exception&) {
            throw ParseError(line_no, "bad dimension '" + tok + "'");
        }
        if (used != tok.size() || v <= 0) throw ParseError(line_no, "bad dimension '" + tok + "'");
        dims.push_back(static_cast<Index>(v));
    }
    if (dims.empty()) throw ParseError(line_no, "header lists no dimensions");

    const Index expected = element_count(dims);
    Vector<Scalar> values(static_cast<Eigen::Index>(expected));
    Index count = 0;
    while (std::getline(is, line)) {
        ++line_no;
        std::istringstream row(line);
        while (row >> tok) {
            std::size_t used = 0;
            double v = 0;
            try {
                v = std::stod(tok, &used);
            } catch (const std::exception&) {
                throw ParseError(line_no, "bad value '" + tok + "'");
            }
            if (used != tok.size()) throw ParseError(line_no, "bad value '" + tok + "'");
            if (count >= expected)
                throw ParseError(line_no, "more values than dims product " + std::to_string(expected));
            values[static_cast<Eigen::Index>(count++)] = static_cast<Scalar>(v);
        }
    }
    if (count != expected)
        throw ParseError(line_no, "expected " + std::to_string(expected) + " values, found " +
                                      std::to_string(count));
    return Tensor<Scalar>(std::move(dims), std::move(values));
}

/// Index of the largest entry; ties go to the lowest flat offset.
template <typename Derived>
Index argmax_first(const Eigen::DenseBase<Derived>& v) {
    Index best = 0;
    auto best_val = v(0);
    for (Eigen::Index k = 1; k < v.size(); ++k)
        if (v(k) > best_val) {
            best_val = v(k);
            best = static_cast<Index>(k);
        }
    return best;
}

/// Flat offsets of the decision slice with the first context.size() modes fixed.
inline std::pair<Index, Index> slice_range(const Context& context, const Dims& dims) {
    if (context.size() > dims.size()) throw std::out_of_range("context longer than tensor order");
    Index start = 0;
    for (Index j = 0; j < context.size(); ++j) {
        if (context[j] >= dims[j]) throw std::out_of_range("context index out of range");
        start = start * dims[j] + context[j];
    }
    Index len = 1;
    for (Index j = context.size(); j < dims.size(); ++j) len *= dims[j];
    return {start * len, len};
}

}  // namespace tb
