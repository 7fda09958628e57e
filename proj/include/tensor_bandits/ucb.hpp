#pragma once

// Vectorized UCB: every entry of the arm box is an independent arm, scored by
// the UCB1 index mean + alpha sqrt(2 log t / count).  In contextual problems
// each context cell keeps its own independent state over its decision slice.

#include "tensor_bandits/tensor.hpp"

#include <map>
#include <optional>
#include <vector>

namespace tb {

struct UcbState {
    std::vector<Index> counts;
    std::vector<double> means;
    Index t = 0;
    double alpha = 1.0;

    UcbState() = default;
    UcbState(Index arms, double alpha);

    Index arms() const noexcept { return counts.size(); }
    /// UCB1 index of an arm that has been pulled at least once.
    double index(Index arm) const;
};

/// Lowest unpulled offset if any, else the first argmax of the index.
Index ucb_next_index(const UcbState& state);
void ucb_update(UcbState& state, Index arm, double reward);

class VectorizedUcb {
public:
    VectorizedUcb(Dims dims, Index context_dim, double alpha = 1.0);

    Arm next_arm(const std::optional<Context>& context = std::nullopt);
    void update(const Arm& arm, double reward);

    const UcbState& state(const Context& context = {}) const;
    Index cells() const noexcept { return cells_.size(); }

private:
    UcbState& cell(const Context& context);

    Dims dims_;
    Index context_dim_;
    double alpha_;
    Index slice_size_ = 1;
    std::map<Context, UcbState> cells_;
};

}  // namespace tb
