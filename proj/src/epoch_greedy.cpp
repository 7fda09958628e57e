#include "tensor_bandits/epoch_greedy.hpp"

#include "tensor_bandits/environment.hpp"

#include <cmath>

namespace tb {

const char* to_string(EpochPhase phase) {
    switch (phase) {
        case EpochPhase::Initialize: return "initialize";
        case EpochPhase::Explore: return "explore";
        case EpochPhase::Exploit: return "exploit";
    }
    return "?";
}

Index initialization_length(Index p, Index r, Index d, double c0) {
    if (p < 1 || r < 1 || d < 1) throw std::invalid_argument("initialization_length: p, r, d must be positive");
    if (!(c0 > 0)) throw std::invalid_argument("initialization_length: C0 must be positive");
    const double dd = static_cast<double>(d);
    const double s1 = std::ceil(c0 * std::pow(static_cast<double>(r), (dd - 2.0) / 2.0) *
                                std::pow(static_cast<double>(p), dd / 2.0));
    return std::max<Index>(2, static_cast<Index>(s1));
}

Index exploit_length(Index k, Index s1, double c2, Index p, Index r, Index d) {
    if (p < 2) throw std::domain_error("exploit_length: p must be at least 2 so that log p > 0");
    if (!(c2 > 0)) throw std::domain_error("exploit_length: C2 must be positive");
    const double dd = static_cast<double>(d);
    const double value = c2 * std::pow(static_cast<double>(p), -(dd + 1.0) / 2.0) /
                         std::sqrt(static_cast<double>(r)) / std::sqrt(std::log(static_cast<double>(p))) *
                         std::sqrt(static_cast<double>(k + s1));
    return std::max<Index>(1, static_cast<Index>(std::ceil(value)));
}

EpochGreedy::EpochGreedy(EpochGreedyConfig config) : config_(std::move(config)) {
    check_dims(config_.dims);
    if (config_.ranks.size() != config_.dims.size())
        throw std::invalid_argument("epoch-greedy: ranks must have one entry per mode");
    if (config_.context_dim >= config_.dims.size())
        throw std::invalid_argument("epoch-greedy: at least one decision mode is required");
    config_.completion.ranks = config_.ranks;
    // The schedule constants are stated for equal dims/ranks; use the largest.
    p_ = *std::max_element(config_.dims.begin(), config_.dims.end());
    r_ = *std::max_element(config_.ranks.begin(), config_.ranks.end());
    s1_ = initialization_length(p_, r_, config_.dims.size(), config_.init_constant);
    (void)exploit_length(0, s1_, config_.c2, p_, r_, config_.dims.size());
}

EpochPhase EpochGreedy::upcoming_phase() const noexcept {
    if (steps_ < s1_) return EpochPhase::Initialize;
    return exploit_left_ > 0 ? EpochPhase::Exploit : EpochPhase::Explore;
}

Arm EpochGreedy::random_arm(Rng& rng, const std::optional<Context>& context) const {
    Arm a = uniform_arm(config_.dims, rng);
    if (context)
        for (Index j = 0; j < context->size(); ++j) a.index[j] = (*context)[j];
    return a;
}

void EpochGreedy::refresh_estimate() {
    if (!stale_ && estimate_) return;
    estimate_ = complete(history_, config_.dims, config_.completion);
    reconstruction_ = tucker_reconstruct(*estimate_);
    stale_ = false;
    ++completions_;
}

EpochStep EpochGreedy::next_arm(Rng& rng, const std::optional<Context>& context) {
    if (context && context->size() != config_.context_dim)
        throw std::invalid_argument("epoch-greedy: context length mismatch");
    const EpochPhase phase = upcoming_phase();
    if (phase != EpochPhase::Exploit) return {random_arm(rng, context), phase};
    if (history_.size() < 2) throw std::logic_error("epoch-greedy: exploit requested before any estimate exists");
    refresh_estimate();
    return {best_entry(*reconstruction_, context).arm, phase};
}

void EpochGreedy::update(const Arm& arm, double reward, EpochPhase phase) {
    if (phase != upcoming_phase()) throw std::logic_error("epoch-greedy: update phase does not match schedule");
    ++steps_;
    const Index d = config_.dims.size();
    switch (phase) {
        case EpochPhase::Initialize:
            history_.push_back({arm, reward});
            stale_ = true;
            if (steps_ == s1_) exploit_left_ = exploit_length(0, s1_, config_.c2, p_, r_, d);
            break;
        case EpochPhase::Exploit:
            --exploit_left_;
            break;
        case EpochPhase::Explore:
            history_.push_back({arm, reward});
            stale_ = true;
            ++epoch_;
            exploit_left_ = exploit_length(epoch_, s1_, config_.c2, p_, r_, d);
            break;
    }
}

}  // namespace tb
