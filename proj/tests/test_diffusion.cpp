#include <doctest.h>

#include <map>

#include "cdc/diffusion.hpp"
#include "cdc/errors.hpp"
#include "cdc/oracles.hpp"

using namespace cdc;

namespace {

Vocabulary tiny_vocab() { return Vocabulary::with_mask({"a", "b"}); }

TokenState clean_state(std::vector<int> tokens) {
    TokenState s;
    s.tokens = std::move(tokens);
    s.context = empty_context();
    s.timestep = 0;
    return s;
}

}  // namespace

TEST_SUITE_BEGIN("diffusion");

TEST_CASE("forward corruption at t=T masks everything") {
    const auto vocab = tiny_vocab();
    const auto sched = make_schedule(3, ScheduleKind::Linear);
    SplitRng rng(1);
    const auto xt = forward_corrupt(clean_state({0, 1, 0, 1}), 3, sched, vocab.mask_id(), rng);
    CHECK(xt.masked_count(vocab.mask_id()) == 4);
}

TEST_CASE("forward corruption at t=0 is the identity") {
    const auto vocab = tiny_vocab();
    const auto sched = make_schedule(3, ScheduleKind::Linear);
    SplitRng rng(1);
    const auto x0 = clean_state({0, 1, 0, 1});
    const auto xt = forward_corrupt(x0, 0, sched, vocab.mask_id(), rng);
    CHECK(xt.tokens == x0.tokens);
}

TEST_CASE("forward corruption rejects masked input") {
    const auto vocab = tiny_vocab();
    const auto sched = make_schedule(3, ScheduleKind::Linear);
    SplitRng rng(1);
    CHECK_THROWS_AS(forward_corrupt(clean_state({0, vocab.mask_id()}), 1, sched, vocab.mask_id(), rng),
                    InvalidArgument);
}

TEST_CASE("empirical mask fraction tracks 1 - alpha_t") {
    const auto vocab = tiny_vocab();
    const auto sched = make_schedule(4, ScheduleKind::Linear);  // alpha_2 = 0.5
    const auto x0 = clean_state(std::vector<int>(1000, 0));
    SplitRng root(99);
    long masked = 0;
    const int trials = 100;
    for (int i = 0; i < trials; ++i) {
        SplitRng rng = root.split(i);
        masked += forward_corrupt(x0, 2, sched, vocab.mask_id(), rng).masked_count(vocab.mask_id());
    }
    const double fraction = static_cast<double>(masked) / (1000.0 * trials);
    CHECK(fraction > 0.46);
    CHECK(fraction < 0.54);
}

TEST_CASE("reverse step copies committed positions verbatim") {
    const auto vocab = tiny_vocab();
    const auto sched = make_schedule(4, ScheduleKind::Linear);
    TokenState xt = clean_state({0, vocab.mask_id(), 1});
    xt.timestep = 3;
    UniformDenoiser den(vocab);
    SplitRng rng(5);
    for (int i = 0; i < 50; ++i) {
        SplitRng r = rng.split(i);
        const auto next = reverse_step(xt, den.predict(xt, 3), sched, vocab.mask_id(), r);
        CHECK(next.tokens[0] == 0);
        CHECK(next.tokens[2] == 1);
        CHECK(next.timestep == 2);
    }
}

TEST_CASE("reverse step at t=1 fills every mask") {
    const auto vocab = tiny_vocab();
    const auto sched = make_schedule(4, ScheduleKind::Linear);
    TokenState xt = clean_state({vocab.mask_id(), vocab.mask_id()});
    xt.timestep = 1;
    UniformDenoiser den(vocab);
    SplitRng rng(5);
    const auto next = reverse_step(xt, den.predict(xt, 1), sched, vocab.mask_id(), rng);
    CHECK(next.masked_count(vocab.mask_id()) == 0);
}

TEST_CASE("reverse step dimension mismatch is rejected") {
    const auto vocab = tiny_vocab();
    const auto sched = make_schedule(4, ScheduleKind::Linear);
    TokenState xt = clean_state({vocab.mask_id(), vocab.mask_id()});
    xt.timestep = 2;
    CleanProposal p = one_hot_proposal({0}, vocab.size());
    SplitRng rng(1);
    CHECK_THROWS_AS(reverse_step(xt, p, sched, vocab.mask_id(), rng), InvalidArgument);
}

TEST_CASE("masked position splits mass gamma to mask, eta to the proposal row") {
    const auto vocab = tiny_vocab();
    // linear T=4, t=4: gamma = 0.75, eta = 0.25
    const auto sched = make_schedule(4, ScheduleKind::Linear);
    TokenState xt = clean_state({vocab.mask_id()});
    xt.timestep = 4;
    CleanProposal p = one_hot_proposal({1}, vocab.size());
    SplitRng root(17);
    int stay_mask = 0, got_token = 0;
    const int runs = 10000;
    for (int i = 0; i < runs; ++i) {
        SplitRng rng = root.split(i);
        const auto next = reverse_step(xt, p, sched, vocab.mask_id(), rng);
        if (next.tokens[0] == vocab.mask_id()) ++stay_mask;
        else if (next.tokens[0] == 1) ++got_token;
    }
    CHECK(stay_mask + got_token == runs);
    CHECK(std::abs(stay_mask / static_cast<double>(runs) - 0.75) < 0.02);
    CHECK(std::abs(got_token / static_cast<double>(runs) - 0.25) < 0.02);
}

TEST_CASE("kernel normalization: gamma + eta * rowsum = 1 exactly") {
    const auto vocab = tiny_vocab();
    const auto sched = make_schedule(6, ScheduleKind::Cosine);
    UniformDenoiser den(vocab);
    TokenState xt = clean_state({vocab.mask_id(), 0});
    for (int t = 1; t <= 6; ++t) {
        xt.timestep = t;
        const auto p = den.predict(xt, t);
        const auto [gamma, eta] = gamma_eta(sched, t);
        for (int i = 0; i < p.length(); ++i)
            CHECK(std::abs(gamma + eta * p.probs.row(i).sum() - 1.0) <= 1e-12);
    }
}

TEST_CASE("committed tokens never change across the remaining chain") {
    const auto vocab = tiny_vocab();
    const auto sched = make_schedule(6, ScheduleKind::Linear);
    UniformDenoiser den(vocab);
    SplitRng rng(23);
    TokenState x = all_mask_state(5, vocab.mask_id(), 6, empty_context());
    std::map<int, int> committed;
    for (int t = 6; t >= 1; --t) {
        x = reverse_step(x, den.predict(x, t), sched, vocab.mask_id(), rng);
        for (const auto& [pos, tok] : committed) CHECK(x.tokens[pos] == tok);
        for (int i = 0; i < x.length(); ++i)
            if (x.tokens[i] != vocab.mask_id() && !committed.count(i)) committed[i] = x.tokens[i];
    }
}

TEST_CASE("vanilla sampling with T=1 draws straight from the proposal") {
    const auto vocab = tiny_vocab();
    const auto sched = make_schedule(1, ScheduleKind::Linear);
    UniformDenoiser den(vocab);
    SplitRng root(3);
    std::map<int, int> counts;
    for (int i = 0; i < 4000; ++i) {
        SplitRng rng = root.split(i);
        const auto s = sample_vanilla(den, empty_context(), 1, sched, rng);
        counts[s.tokens[0]] += 1;
    }
    CHECK(counts[0] + counts[1] == 4000);
    CHECK(std::abs(counts[0] - 2000) < 200);
}

TEST_CASE("vanilla sampler matches exact enumeration within TV 0.02") {
    const auto vocab = tiny_vocab();
    const auto sched = make_schedule(2, ScheduleKind::Linear);
    UniformDenoiser den(vocab);
    const auto exact = oracles::exact_posterior(den, sched, 2, empty_context());

    std::map<std::vector<int>, double> empirical;
    const int runs = 20000;
    SplitRng root(7);
    for (int i = 0; i < runs; ++i) {
        SplitRng rng = root.split(i);
        empirical[sample_vanilla(den, empty_context(), 2, sched, rng).tokens] += 1.0 / runs;
    }
    CHECK(oracles::tv_distance(exact, empirical) <= 0.02);
}

TEST_CASE("same seed gives bit-identical trajectories") {
    const auto vocab = tiny_vocab();
    const auto sched = make_schedule(5, ScheduleKind::Cosine);
    UniformDenoiser den(vocab);
    SplitRng a(42), b(42);
    const auto s1 = sample_vanilla(den, empty_context(), 8, sched, a);
    const auto s2 = sample_vanilla(den, empty_context(), 8, sched, b);
    CHECK(s1.tokens == s2.tokens);
    CHECK(s1.masked_count(vocab.mask_id()) == 0);
}

TEST_CASE("denoiser failures surface as denoiser errors") {
    struct ThrowingDenoiser final : Denoiser {
        Vocabulary v = Vocabulary::with_mask({"a", "b"});
        CleanProposal predict(const TokenState&, int) const override {
            throw std::runtime_error("backend gone");
        }
        const Vocabulary& vocab() const override { return v; }
    };
    ThrowingDenoiser den;
    const auto sched = make_schedule(2, ScheduleKind::Linear);
    SplitRng rng(1);
    CHECK_THROWS_AS(sample_vanilla(den, empty_context(), 2, sched, rng), DenoiserError);
}

TEST_CASE("proposal validation catches bad rows") {
    const auto vocab = tiny_vocab();
    CleanProposal p = one_hot_proposal({0, 1}, vocab.size());
    CHECK_NOTHROW(validate_proposal(p, vocab.mask_id()));
    p.probs(0, vocab.mask_id()) = 0.5;
    CHECK_THROWS_AS(validate_proposal(p, vocab.mask_id()), InvalidArgument);
    p = one_hot_proposal({0, 1}, vocab.size());
    p.probs(1, 0) = 0.7;  // row no longer sums to 1
    CHECK_THROWS_AS(validate_proposal(p, vocab.mask_id()), InvalidArgument);
}

TEST_SUITE_END();
