#include "doctest.h"
#include "support.hpp"

#include "tensor_bandits/environment.hpp"
#include "tensor_bandits/ucb.hpp"

using namespace tbt;

TEST_CASE("UCB index") {
    UcbState s(2, 1.0);
    CHECK(ucb_next_index(s) == 0);
    s.counts = {100, 1};
    s.means = {1.0, 0.0};
    s.t = 101;
    CHECK(s.index(0) == doctest::Approx(1.0 + std::sqrt(2.0 * std::log(101.0) / 100.0)));
    CHECK(s.index(0) == doctest::Approx(1.30).epsilon(0.01));
    CHECK(s.index(1) == doctest::Approx(3.04).epsilon(0.01));
    CHECK(ucb_next_index(s) == 1);

    UcbState fresh(3, 1.0);
    CHECK_THROWS_AS(fresh.index(0), std::logic_error);
    CHECK_THROWS(UcbState(0, 1.0));
    CHECK_THROWS(UcbState(2, 0.0));
}

TEST_CASE("UCB means") {
    UcbState s(3, 1.0);
    ucb_update(s, 1, 1.0);
    ucb_update(s, 1, 3.0);
    CHECK(s.means[1] == 2.0);
    CHECK(s.counts[1] == 2);

    for (int k = 0; k < 37; ++k) ucb_update(s, 2, 0.1);
    CHECK(s.means[2] == 0.1);

    Rng rng(51);
    UcbState big(1, 1.0);
    double sum = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const double y = 5.0 + standard_normal(rng);
        sum += y;
        ucb_update(big, 0, y);
    }
    CHECK(std::abs(big.means[0] - sum / 1000.0) <= 1e-12);
    Index total = 0;
    for (Index c : s.counts) total += c;
    CHECK(total == s.t);
}

TEST_CASE("noiseless UCB settles on the best arm") {
    // the gap must exceed the largest bonus sqrt(2 log t) for this to hold
    Environment env;
    env.truth = DenseTensor::Zero({4, 4, 4});
    env.truth({2, 1, 3}) = 10.0;
    env.noise_std = 0.0;
    VectorizedUcb ucb(env.dims(), 0);
    Rng rng(53);
    for (Index t = 0; t < 64; ++t) {
        const Arm a = ucb.next_arm();
        CHECK(flat_offset(a, env.dims()) == t);
        ucb.update(a, pull(env, a, rng));
    }
    const Arm best = oracle(env).arm;
    for (int t = 0; t < 200; ++t) {
        const Arm a = ucb.next_arm();
        CHECK(a == best);
        ucb.update(a, pull(env, a, rng));
    }
}

TEST_CASE("contextual UCB keeps one cell per context") {
    Environment env = synth_env(Dims{3, 2, 4}, Dims{1, 1, 1}, 1.0, 0.5, 2, 54);
    VectorizedUcb ucb(env.dims(), 2);
    Rng rng(55);
    for (int t = 0; t < 300; ++t) {
        const Context ctx = draw_context(env, rng);
        const Arm a = ucb.next_arm(ctx);
        CHECK(a[0] == ctx[0]);
        CHECK(a[1] == ctx[1]);
        ucb.update(a, pull(env, a, rng));
    }
    CHECK(ucb.cells() == 6);
    Index total = 0;
    for (Index i = 0; i < 3; ++i)
        for (Index j = 0; j < 2; ++j) {
            const UcbState& s = ucb.state({i, j});
            CHECK(s.arms() == 4);
            Index n = 0;
            for (Index c : s.counts) n += c;
            CHECK(n == s.t);
            total += s.t;
        }
    CHECK(total == 300);
    VectorizedUcb unseen(env.dims(), 2);
    CHECK_THROWS_AS(unseen.state({0, 0}), std::out_of_range);
    CHECK_THROWS(ucb.next_arm(Context{1}));
}
