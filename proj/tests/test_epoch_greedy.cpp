#include "doctest.h"
#include "support.hpp"

#include "tensor_bandits/environment.hpp"
#include "tensor_bandits/epoch_greedy.hpp"

#include <string>

using namespace tbt;

TEST_CASE("schedule lengths") {
    const double by_hand = 10.0 * std::pow(15.0, -2.0) / std::sqrt(2.0) / std::sqrt(std::log(15.0)) * std::sqrt(82.0);
    CHECK(by_hand == doctest::Approx(0.1731).epsilon(1e-3));
    CHECK(exploit_length(0, 82, 10.0, 15, 2, 3) == 1);
    CHECK(exploit_length(0, 82, 1e-9, 15, 2, 3) == 1);
    CHECK(exploit_length(0, 1, 1e9, 2, 1, 1) ==
          static_cast<Index>(std::ceil(1e9 / 2.0 / std::sqrt(std::log(2.0)))));

    Index prev = 0;
    for (Index k = 0; k <= 10000; ++k) {
        const Index s = exploit_length(k, 82, 2000.0, 15, 2, 3);
        CHECK(s >= prev);
        prev = s;
    }
    CHECK(prev > 1);
    CHECK_THROWS_AS(exploit_length(0, 5, 1.0, 1, 1, 3), std::domain_error);

    CHECK(initialization_length(15, 2, 3) == 83);
    CHECK(initialization_length(8, 1, 3) == 23);
    CHECK(initialization_length(4, 1, 3, 1e-6) == 2);
}

TEST_CASE("phase sequence and history") {
    EpochGreedyConfig cfg;
    cfg.dims = {4, 4, 4};
    cfg.ranks = {1, 1, 1};
    cfg.init_constant = 0.375;
    cfg.c2 = 1e-9;
    EpochGreedy policy(cfg);
    REQUIRE(policy.s1() == 3);

    const Environment env = synth_env(4, 1, 1.0, 1.0, 0, 11);
    Rng rng(5);
    std::string seq;
    for (int t = 0; t < 7; ++t) {
        const Index before = policy.history().size();
        const EpochStep s = policy.next_arm(rng);
        seq += s.phase == EpochPhase::Initialize ? 'I' : s.phase == EpochPhase::Explore ? 'E' : 'X';
        policy.update(s.arm, pull(env, s.arm, rng), s.phase);
        CHECK(policy.history().size() == before + (s.phase == EpochPhase::Exploit ? 0 : 1));
    }
    CHECK(seq == "IIIXEXE");
    CHECK(policy.history().size() == 5);
    CHECK(policy.epoch_index() == 2);
}

TEST_CASE("epoch state machine") {
    EpochGreedyConfig cfg;
    cfg.dims = {5, 5, 5};
    cfg.ranks = {1, 1, 1};
    cfg.init_constant = 0.5;
    cfg.c2 = 2000.0;
    EpochGreedy policy(cfg);
    const Index s1 = policy.s1();
    const Environment env = synth_env(5, 1, 1.0, 1.0, 0, 12);
    Rng rng(6);

    Index explores = 0;
    Index last_epoch = 0;
    for (int t = 0; t < 600; ++t) {
        const EpochStep s = policy.next_arm(rng);
        CHECK(s.phase == policy.upcoming_phase());
        policy.update(s.arm, pull(env, s.arm, rng), s.phase);
        if (s.phase == EpochPhase::Explore) {
            ++explores;
            CHECK(policy.epoch_index() == last_epoch + 1);
            CHECK(policy.steps_left_in_exploit() == exploit_length(policy.epoch_index(), s1, cfg.c2, 5, 1, 3));
        }
        if (s.phase == EpochPhase::Initialize && policy.steps() == s1)
            CHECK(policy.steps_left_in_exploit() == exploit_length(0, s1, cfg.c2, 5, 1, 3));
        last_epoch = policy.epoch_index();
        CHECK(policy.history().size() == std::min<Index>(policy.steps(), s1) + explores);
    }
    CHECK(explores > 0);
    // the estimate is recomputed once per epoch, not once per exploit step
    CHECK(policy.completions() <= policy.epoch_index() + 1);

    const EpochStep s = policy.next_arm(rng);
    const EpochPhase wrong = s.phase == EpochPhase::Exploit ? EpochPhase::Explore : EpochPhase::Exploit;
    CHECK_THROWS_AS(policy.update(s.arm, 0.0, wrong), std::logic_error);
}

TEST_CASE("exploit follows the estimate") {
    EpochGreedyConfig cfg;
    cfg.dims = {6, 6, 6};
    cfg.ranks = {1, 1, 1};
    cfg.init_constant = 3.0;
    cfg.c2 = 1e-9;
    EpochGreedy policy(cfg);
    const Environment env = synth_env(6, 1, 1.0, 0.0, 0, 13);
    Rng rng(7);
    while (policy.upcoming_phase() == EpochPhase::Initialize) {
        const EpochStep s = policy.next_arm(rng);
        policy.update(s.arm, pull(env, s.arm, rng), s.phase);
    }
    const EpochStep s = policy.next_arm(rng);
    REQUIRE(s.phase == EpochPhase::Exploit);
    REQUIRE(policy.current_estimate());
    CHECK(s.arm == best_entry(tucker_reconstruct(*policy.current_estimate())).arm);
}

TEST_CASE("contextual exploitation stays in the slice") {
    EpochGreedyConfig cfg;
    cfg.dims = {4, 3, 5};
    cfg.ranks = {1, 1, 1};
    cfg.context_dim = 1;
    cfg.c2 = 1e-9;
    EpochGreedy policy(cfg);
    Environment env = synth_env(Dims{4, 3, 5}, Dims{1, 1, 1}, 1.0, 0.5, 1, 14);
    Rng rng(8);
    for (int t = 0; t < 200; ++t) {
        const Context ctx = draw_context(env, rng);
        const EpochStep s = policy.next_arm(rng, ctx);
        CHECK(s.arm[0] == ctx[0]);
        policy.update(s.arm, pull(env, s.arm, rng), s.phase);
    }
    CHECK_THROWS(policy.next_arm(rng, Context{0, 1}));
}
