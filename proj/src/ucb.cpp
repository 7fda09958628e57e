#include "tensor_bandits/ucb.hpp"

#include <cmath>
#include <stdexcept>

namespace tb {

UcbState::UcbState(Index arms, double alpha_) : counts(arms, 0), means(arms, 0.0), alpha(alpha_) {
    if (arms < 1) throw std::invalid_argument("ucb: need at least one arm");
    if (!(alpha_ > 0)) throw std::invalid_argument("ucb: alpha must be positive");
}

double UcbState::index(Index arm) const {
    const Index n = counts.at(arm);
    if (n == 0) throw std::logic_error("ucb: index of an unpulled arm");
    const double bonus = t > 1 ? std::sqrt(2.0 * std::log(static_cast<double>(t)) / static_cast<double>(n)) : 0.0;
    return means[arm] + alpha * bonus;
}

Index ucb_next_index(const UcbState& state) {
    for (Index a = 0; a < state.arms(); ++a)
        if (state.counts[a] == 0) return a;
    Index best = 0;
    double best_value = state.index(0);
    for (Index a = 1; a < state.arms(); ++a) {
        const double v = state.index(a);
        if (v > best_value) {
            best_value = v;
            best = a;
        }
    }
    return best;
}

void ucb_update(UcbState& state, Index arm, double reward) {
    Index& n = state.counts.at(arm);
    ++n;
    state.means[arm] += (reward - state.means[arm]) / static_cast<double>(n);
    ++state.t;
}

VectorizedUcb::VectorizedUcb(Dims dims, Index context_dim, double alpha)
    : dims_(std::move(dims)), context_dim_(context_dim), alpha_(alpha) {
    check_dims(dims_);
    if (context_dim_ >= dims_.size()) throw std::invalid_argument("ucb: at least one decision mode is required");
    if (!(alpha_ > 0)) throw std::invalid_argument("ucb: alpha must be positive");
    for (Index j = context_dim_; j < dims_.size(); ++j) slice_size_ *= dims_[j];
}

UcbState& VectorizedUcb::cell(const Context& context) {
    if (context.size() != context_dim_) throw std::invalid_argument("ucb: context length mismatch");
    auto it = cells_.find(context);
    if (it == cells_.end()) it = cells_.emplace(context, UcbState(slice_size_, alpha_)).first;
    return it->second;
}

const UcbState& VectorizedUcb::state(const Context& context) const {
    auto it = cells_.find(context);
    if (it == cells_.end()) throw std::out_of_range("ucb: context cell never visited");
    return it->second;
}

Arm VectorizedUcb::next_arm(const std::optional<Context>& context) {
    const Context ctx = context.value_or(Context{});
    const auto [start, len] = slice_range(ctx, dims_);
    (void)len;
    return arm_from_offset(start + ucb_next_index(cell(ctx)), dims_);
}

void VectorizedUcb::update(const Arm& arm, double reward) {
    const Context ctx(arm.index.begin(), arm.index.begin() + static_cast<std::ptrdiff_t>(context_dim_));
    const auto [start, len] = slice_range(ctx, dims_);
    (void)len;
    ucb_update(cell(ctx), flat_offset(arm, dims_) - start, reward);
}

}  // namespace tb
