// Acceptance suite: every criterion prints one PASS/FAIL line and the
// process exits nonzero when any of them fails.

#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "cdc/diffusion.hpp"
#include "cdc/engine.hpp"
#include "cdc/gradguide.hpp"
#include "cdc/mdfi.hpp"
#include "cdc/metrics.hpp"
#include "cdc/mini/gen.hpp"
#include "cdc/mini/lexer.hpp"
#include "cdc/ngram.hpp"
#include "cdc/oracles.hpp"
#include "cdc/runner.hpp"
#include "cdc/surrogate.hpp"

using namespace cdc;

namespace {

int g_criterion = 0;
int g_passed = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
    ++g_criterion;
    if (ok) ++g_passed;
    std::printf("[%d/9] %s  %s  (%s)\n", g_criterion, ok ? "PASS" : "FAIL", name.c_str(),
                detail.c_str());
    std::fflush(stdout);
}

// ---------------------------------------------------------------- suites --

RunConfig security_config(const std::string& op) {
    RunConfig c;
    c.seed = 7;
    c.T = 32;
    c.length = 40;
    c.tasks = 200;
    c.operator_name = op;
    c.suite_kind = "security";
    c.denoiser_corpus.kind = mini::GenKind::Security;
    c.denoiser_corpus.count = 6000;
    c.denoiser_corpus.length = 40;
    c.denoiser_corpus.rigid = true;
    c.denoiser_corpus.vuln_rate = 0.5;
    c.ngram.w_unigram = 0.8;
    c.ngram.w_left = 0.1;
    c.ngram.w_right = 0.1;
    c.ngram.smoothing = 0.02;
    c.ngram.hint_weight = 1.0;
    // rho_min = 0.5, b_int = 2, k_insert = 12 are the deployed values
    return c;
}

RunConfig functional_config(const std::string& op) {
    RunConfig c;
    c.seed = 11;
    c.T = 32;
    c.length = 40;
    c.tasks = 200;
    c.operator_name = op;
    c.suite_kind = "functional";
    c.target = 7;
    c.denoiser_corpus.kind = mini::GenKind::Functional;
    c.denoiser_corpus.count = 8000;
    c.denoiser_corpus.length = 40;
    c.denoiser_corpus.rigid = true;
    c.denoiser_corpus.correct_rate = 0.3;
    c.denoiser_corpus.target = 7;
    c.surrogate_corpus = c.denoiser_corpus;
    c.surrogate_corpus.count = 10000;
    c.surrogate.epochs = 300;
    c.ngram.w_unigram = 0.92;
    c.ngram.w_left = 0.04;
    c.ngram.w_right = 0.04;
    c.ngram.smoothing = 0.02;
    return c;
}

// ------------------------------------------------------------- criteria --

void criterion_kernel() {
    bool ok = true;
    std::string detail;

    // gamma + eta = 1 exactly, both schedule kinds
    for (auto kind : {ScheduleKind::Linear, ScheduleKind::Cosine}) {
        const auto sched = make_schedule(16, kind);
        for (int t = 1; t <= 16; ++t) {
            const auto [gamma, eta] = gamma_eta(sched, t);
            ok = ok && std::abs(gamma + eta - 1.0) <= 1e-15;
        }
    }

    // empirical forward mask rate within +-2% of 1 - alpha_t (10k samples)
    {
        const auto sched = make_schedule(4, ScheduleKind::Linear);
        const Vocabulary vv = Vocabulary::with_mask({"a", "b"});
        TokenState x0;
        x0.tokens.assign(100, 0);
        x0.context = empty_context();
        SplitRng root(101);
        for (int t = 1; t <= 3; ++t) {
            long masked = 0;
            for (int i = 0; i < 10000; ++i) {
                SplitRng rng = root.split(t * 100000 + i);
                masked += forward_corrupt(x0, t, sched, vv.mask_id(), rng).masked_count(vv.mask_id());
            }
            const double rate = masked / 1e6;
            ok = ok && std::abs(rate - (1.0 - sched.alpha[t])) <= 0.02;
        }
    }

    // vanilla sampler vs exact enumeration on a structured tiny denoiser
    {
        const Vocabulary vv = Vocabulary::with_mask({"a", "b", "c"});
        Corpus corpus;
        for (int i = 0; i < 6; ++i) {
            CorpusEntry e;
            e.tokens = {i % 3, (i + 1) % 3, i % 2};
            corpus.programs.push_back(e);
        }
        const auto den = NgramDenoiser::train(corpus, vv, NgramConfig{});
        const auto sched = make_schedule(3, ScheduleKind::Linear);
        const auto exact = oracles::exact_posterior(den, sched, 3, empty_context());

        std::map<std::vector<int>, double> empirical;
        const int runs = 50000;
        SplitRng root(2027);
        for (int i = 0; i < runs; ++i) {
            SplitRng rng = root.split(i);
            empirical[sample_vanilla(den, empty_context(), 3, sched, rng).tokens] += 1.0 / runs;
        }
        const double tv = oracles::tv_distance(exact, empirical);
        detail = "sampler vs enumeration TV = " + std::to_string(tv);
        ok = ok && tv <= 0.02;
    }
    report("kernel correctness", ok, detail);
}

void criterion_identity() {
    bool ok = true;
    const auto vocab = mini::default_vocab();
    const auto registry = mini::default_registry();

    mini::GenConfig gen;
    gen.kind = mini::GenKind::Mixed;
    gen.count = 400;
    gen.security_rate = 0.5;
    SplitRng grng(9);
    const auto corpus = mini::gen_corpus(gen, vocab, registry, grng);
    const auto den = NgramDenoiser::train(corpus, vocab, NgramConfig{});
    const auto sched = make_schedule(12, ScheduleKind::Linear);

    // identity operator: bit-identical to vanilla, per seed
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL, 5ULL}) {
        SplitRng r1(seed), r2(seed);
        const auto vanilla = sample_vanilla(den, empty_context(), 32, sched, r1);
        IdentityOperator identity;
        const auto [constrained, trace] = run_constrained(den, identity, empty_context(), 32, sched, r2);
        ok = ok && constrained.tokens == vanilla.tokens;
    }

    // lambda = mu = 0 makes the projection an identity to 1e-9
    {
        SplitRng rng(3);
        CleanProposal p;
        p.probs.setZero(4, vocab.size());
        for (int i = 0; i < 4; ++i) {
            double z = 0.0;
            for (int v = 0; v < vocab.size(); ++v) {
                if (v == vocab.mask_id()) continue;
                p.probs(i, v) = 0.05 + rng.uniform();
                z += p.probs(i, v);
            }
            p.probs.row(i) /= z;
        }
        gradguide::AlmState state = gradguide::AlmState::make(1);
        state.mu[0] = 0.0;
        gradguide::LinearPenalty penalty(Eigen::MatrixXd::Ones(4, vocab.size()));
        const auto y = gradguide::alm_project(p, EditRegion::from_positions({1}), state, penalty,
                                              vocab.mask_id());
        ok = ok && (y.probs - p.probs).cwiseAbs().maxCoeff() <= 1e-9;
    }

    // MDFI with no witnesses or no open checkpoint stays the identity
    {
        mdfi::MdfiConfig cfg;
        cfg.checkpoints = {6};
        mdfi::MdfiOperator op(den, registry, cfg);
        const auto clean = mini::lex(
            "let a = input ( ) ; let b = escape ( a ) ; check ( b ) ; exec ( b ) ; emit ( b ) ; "
            "let c = 1 ; let d = c + 2 ;",
            vocab);
        TokenState xt;
        xt.tokens = clean;
        xt.context = make_context({}, cfg.b_p, vocab.mask_id(), 0);
        xt.timestep = 6;
        const auto proposal = one_hot_proposal(clean, vocab.size());
        const auto sanitized = op.correct(proposal, xt, 6);
        ok = ok && sanitized.fired == "none" && sanitized.state.tokens == xt.tokens;

        const auto vuln = mini::lex("let a = input ( ) ; exec ( a ) ;", vocab);
        TokenState xv;
        xv.tokens = vuln;
        xv.context = xt.context;
        xv.timestep = 5;  // not a checkpoint
        const auto closed = op.correct(one_hot_proposal(vuln, vocab.size()), xv, 5);
        ok = ok && closed.fired == "none" && closed.state.tokens == xv.tokens;
    }
    report("identity reductions", ok, "vanilla bit-equality, ALM anchor, MDFI gate");
}

void criterion_gradients() {
    const auto vocab = mini::default_vocab();
    SurrogateConfig cfg;
    cfg.seed = 33;
    const auto model = SurrogateModel::init(vocab, cfg);
    SplitRng rng(77);

    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int L = 2 + static_cast<int>(rng.below(3));
        CleanProposal p;
        p.probs.setZero(L, vocab.size());
        for (int i = 0; i < L; ++i) {
            double z = 0.0;
            for (int v = 0; v < vocab.size(); ++v) {
                if (v == vocab.mask_id()) continue;
                p.probs(i, v) = 0.01 + rng.uniform();
                z += p.probs(i, v);
            }
            p.probs.row(i) /= z;
        }
        const SoftEmbedding emb = soft_embed(p, model.embedding());
        const Eigen::MatrixXd analytic = model.grad_wrt_embeddings(emb, 0);
        Eigen::VectorXd flat = Eigen::Map<const Eigen::VectorXd>(emb.data(), emb.size());
        const auto f = [&](const Eigen::VectorXd& x) {
            SoftEmbedding e = Eigen::Map<const Eigen::MatrixXd>(x.data(), emb.rows(), emb.cols());
            const auto g = model.scores(e, 0);
            double total = 0.0;
            for (int j = 0; j < g.size(); ++j)
                total += std::max(0.0, model.tau()[static_cast<std::size_t>(j)] - g[j]);
            return total;
        };
        const Eigen::VectorXd fd = oracles::fd_gradient(f, flat, 1e-5);
        const Eigen::Map<const Eigen::VectorXd> an(analytic.data(), analytic.size());
        const double scale = std::max(fd.cwiseAbs().maxCoeff(), 1e-8);
        worst = std::max(worst, (an - fd).cwiseAbs().maxCoeff() / scale);
    }
    report("gradient fidelity", worst <= 1e-4, "max rel err = " + std::to_string(worst));
}

void criterion_projection() {
    const auto vocab = mini::default_vocab();
    bool ok = true;
    std::string detail;

    // exponential tilt equivalence over several random instances
    {
        SplitRng rng(41);
        double worst_tv = 0.0;
        for (int trial = 0; trial < 10; ++trial) {
            Eigen::VectorXd base = Eigen::VectorXd::Zero(vocab.size());
            Eigen::VectorXd cost = Eigen::VectorXd::Zero(vocab.size());
            for (int v = 0; v < vocab.size(); ++v) {
                if (v == vocab.mask_id()) continue;
                base[v] = 0.02 + rng.uniform();
                cost[v] = rng.uniform();
            }
            base /= base.sum();
            const double lambda = 0.5 + 2.0 * rng.uniform();

            CleanProposal p;
            p.probs = base.transpose();
            gradguide::AlmState state = gradguide::AlmState::make(1);
            state.lambda[0] = lambda;
            state.mu[0] = 0.0;
            state.k_inner = 600;
            state.step_size = 1.0;
            gradguide::LinearPenalty penalty(cost.transpose());
            const auto y = gradguide::alm_project(p, EditRegion::from_positions({0}), state, penalty,
                                                  vocab.mask_id());
            const auto tilt = oracles::tilt_closed_form(base, cost, lambda);
            worst_tv = std::max(worst_tv, 0.5 * (y.probs.row(0).transpose() - tilt).cwiseAbs().sum());
        }
        detail = "tilt TV = " + std::to_string(worst_tv);
        ok = ok && worst_tv <= 1e-3;
    }

    // locality anchor at beta = 1e3
    {
        SplitRng rng(43);
        CleanProposal p;
        p.probs.setZero(6, vocab.size());
        Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(6, vocab.size());
        for (int i = 0; i < 6; ++i) {
            double z = 0.0;
            for (int v = 0; v < vocab.size(); ++v) {
                if (v == vocab.mask_id()) continue;
                p.probs(i, v) = 0.05 + rng.uniform();
                z += p.probs(i, v);
                cost(i, v) = rng.uniform();
            }
            p.probs.row(i) /= z;
        }
        gradguide::AlmState state = gradguide::AlmState::make(1);
        state.lambda[0] = 1.0;
        state.mu[0] = 0.0;
        state.beta = 1e3;
        state.k_inner = 200;
        gradguide::LinearPenalty penalty(cost);
        const auto y = gradguide::alm_project(p, EditRegion::from_positions({2, 3}), state, penalty,
                                              vocab.mask_id());
        double off = 0.0;
        for (int i : {0, 1, 4, 5})
            off = std::max(off, 0.5 * (y.probs.row(i) - p.probs.row(i)).cwiseAbs().sum());
        detail += ", off-region TV = " + std::to_string(off);
        ok = ok && off <= 1e-3;
    }
    report("projection fidelity", ok, detail);
}

void criterion_analyzer() {
    const auto vocab = mini::default_vocab();
    const auto registry = mini::default_registry();

    int fn = 0, fp = 0;
    auto scan = [&](bool rigid, std::uint64_t seed) {
        mini::GenConfig gen;
        gen.kind = mini::GenKind::Security;
        gen.count = 500;
        gen.vuln_rate = 0.5;
        gen.rigid = rigid;
        if (rigid) gen.length = 40;
        SplitRng rng(seed);
        const auto corpus = mini::gen_corpus(gen, vocab, registry, rng);
        for (const auto& e : corpus.programs) {
            const bool flagged = mdfi::has_witnesses(e.tokens, vocab, registry);
            if (e.pattern == "vuln" && !flagged) ++fn;
            if (e.pattern == "safe" && flagged) ++fp;
        }
    };
    scan(false, 55);  // free-form layouts: dataflow and structural patterns
    scan(true, 56);   // rigid layouts used by the end-to-end suites
    report("analyzer exactness", fn == 0 && fp == 0,
           "labeled suites of 2 x 500: FN = " + std::to_string(fn) + ", FP = " + std::to_string(fp));
}

struct SecurityOutcome {
    double vanilla_positive = 0.0;
    double cdc_positive = 0.0;
    int max_interventions = 0;
    SuiteResult vanilla;
    SuiteResult cdc;
};

SecurityOutcome run_security_experiment() {
    SecurityOutcome out;
    const RunConfig base = security_config("none");
    const auto models = prepare_models(base);
    out.vanilla = run_suite(base, models);
    out.cdc = run_suite(security_config("mdfi"), models);
    out.vanilla_positive = 1.0 - out.vanilla.report.security_pass_rate;
    out.cdc_positive = 1.0 - out.cdc.report.security_pass_rate;
    out.max_interventions = out.cdc.report.max_interventions_per_task;
    return out;
}

void criterion_security(const SecurityOutcome& out, const RunConfig& cdc_config) {
    const double relative_drop =
        out.vanilla_positive > 0.0 ? 1.0 - out.cdc_positive / out.vanilla_positive : 0.0;
    const bool ok = out.vanilla_positive >= 0.30 && relative_drop >= 0.50 &&
                    out.max_interventions <= cdc_config.mdfi.b_int;
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "vanilla positive %.1f%%, CDC positive %.1f%%, drop %.1f%%, max interventions %d",
                  100.0 * out.vanilla_positive, 100.0 * out.cdc_positive, 100.0 * relative_drop,
                  out.max_interventions);
    report("end-to-end security repair", ok, buf);
}

struct FunctionalOutcome {
    double vanilla_pass = 0.0;
    double cdc_pass = 0.0;
    SuiteResult vanilla;
    SuiteResult cdc;
};

FunctionalOutcome run_functional_experiment() {
    FunctionalOutcome out;
    const RunConfig base = functional_config("none");
    const auto models = prepare_models(functional_config("gradguide"));
    out.vanilla = run_suite(base, models);
    out.cdc = run_suite(functional_config("gradguide"), models);
    out.vanilla_pass = out.vanilla.report.functional_pass_rate;
    out.cdc_pass = out.cdc.report.functional_pass_rate;
    return out;
}

void criterion_functional(const FunctionalOutcome& out) {
    const bool ok = out.cdc_pass >= out.vanilla_pass + 0.05;
    char buf[120];
    std::snprintf(buf, sizeof buf, "vanilla pass %.1f%%, CDC-GradGuide pass %.1f%%",
                  100.0 * out.vanilla_pass, 100.0 * out.cdc_pass);
    report("end-to-end functional guidance", ok, buf);
}

void criterion_locality(const SecurityOutcome& sec, const FunctionalOutcome& fun) {
    // full-resample baselines over the same suites and models
    const RunConfig sec_baseline_cfg = security_config("resample");
    const RunConfig fun_baseline_cfg = functional_config("resample");
    const auto sec_models = prepare_models(security_config("none"));
    const auto fun_models = prepare_models(functional_config("gradguide"));
    const auto sec_baseline = run_suite(sec_baseline_cfg, sec_models);
    const auto fun_baseline = run_suite(fun_baseline_cfg, fun_models);

    auto regenerated_median = [](const SuiteResult& r) {
        std::vector<double> regen;
        for (const auto& t : r.traces)
            if (t.final_verdicts.value("resampled", false))
                regen.push_back(t.final_verdicts["regenerated_tokens"].get<double>());
        return metrics::median(regen);
    };

    const double sec_cdc_median = sec.cdc.report.edited_per_correction_median;
    const double fun_cdc_median = fun.cdc.report.edited_per_correction_median;
    const double sec_base_median = regenerated_median(sec_baseline);
    const double fun_base_median = regenerated_median(fun_baseline);
    const double mdfi_cluster_median = sec.cdc.report.clusters_per_correction_median;

    const bool ok = sec.cdc.report.correction_bearing_tasks > 0 &&
                    fun.cdc.report.correction_bearing_tasks > 0 &&
                    sec_cdc_median < sec_base_median && fun_cdc_median < fun_base_median &&
                    mdfi_cluster_median <= 2.0;
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "edited medians CDC %.1f/%.1f vs resample %.1f/%.1f (sec/fun), MDFI cluster median %.1f",
                  sec_cdc_median, fun_cdc_median, sec_base_median, fun_base_median,
                  mdfi_cluster_median);
    report("locality", ok, buf);
}

void criterion_accounting(const SecurityOutcome& sec, const FunctionalOutcome& fun) {
    bool ok = true;
    std::string why = "ok";

    auto check_traces = [&](const SuiteResult& result, int T, int L, int k_insert) {
        for (const auto& trace : result.traces) {
            if (static_cast<int>(trace.steps.size()) != T) {
                ok = false;
                why = "step count != T";
            }
            int insertion_events = 0;
            for (const auto& s : trace.steps)
                for (const auto& [anchor, count] : s.insertions) {
                    insertion_events += 1;
                    if (count != k_insert) {
                        ok = false;
                        why = "insertion size != K";
                    }
                }
            if (static_cast<int>(trace.final_tokens.size()) != L + k_insert * insertion_events) {
                ok = false;
                why = "final length != L + K * insertions";
            }
        }
    };
    check_traces(sec.vanilla, 32, 40, security_config("mdfi").mdfi.k_insert);
    check_traces(sec.cdc, 32, 40, security_config("mdfi").mdfi.k_insert);
    check_traces(fun.vanilla, 32, 40, 12);
    check_traces(fun.cdc, 32, 40, 12);

    // lambda >= 0, mu non-decreasing, and Mode B within budget on every
    // gradguide trajectory
    for (const auto& trace : fun.cdc.traces) {
        int mode_b_fires = 0;
        for (const auto& s : trace.steps)
            if (s.report.value("mode_b", false)) ++mode_b_fires;
        if (mode_b_fires > functional_config("gradguide").gradguide.budget) {
            ok = false;
            why = "Mode B exceeded its budget";
        }
        std::vector<double> prev_mu;
        for (const auto& s : trace.steps) {
            if (!s.report.contains("mu")) continue;
            const auto mu = s.report["mu"].get<std::vector<double>>();
            const auto lambda = s.report["lambda"].get<std::vector<double>>();
            for (double l : lambda)
                if (l < 0.0) {
                    ok = false;
                    why = "negative lambda";
                }
            if (!prev_mu.empty())
                for (std::size_t j = 0; j < mu.size(); ++j)
                    if (mu[j] < prev_mu[j] - 1e-12) {
                        ok = false;
                        why = "mu decreased";
                    }
            prev_mu = mu;
        }
    }
    report("budget and accounting invariants", ok, why);
}

}  // namespace

int main() {
    criterion_kernel();
    criterion_identity();
    criterion_gradients();
    criterion_projection();
    criterion_analyzer();

    const SecurityOutcome sec = run_security_experiment();
    criterion_security(sec, security_config("mdfi"));
    const FunctionalOutcome fun = run_functional_experiment();
    criterion_functional(fun);
    criterion_locality(sec, fun);
    criterion_accounting(sec, fun);

    std::printf("acceptance: %d/9 criteria passed\n", g_passed);
    return g_passed == 9 ? 0 : 1;
}
