#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cdc/diffusion.hpp"
#include "cdc/engine.hpp"
#include "cdc/gradguide.hpp"
#include "cdc/mdfi.hpp"
#include "cdc/metrics.hpp"
#include "cdc/mini/gen.hpp"
#include "cdc/mini/lexer.hpp"
#include "cdc/oracles.hpp"
#include "cdc/runner.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw cdc::InvalidArgument("cannot open: " + path);
    json j;
    in >> j;
    return j;
}

cdc::RunConfig load_config(const std::string& path) {
    cdc::RunConfig config = path.empty() ? cdc::RunConfig{} : cdc::RunConfig::from_json(load_json(path));
    if (const char* env_seed = std::getenv("CDC_SEED")) {
        config.seed = std::strtoull(env_seed, nullptr, 10);
    }
    const auto errors = config.validate();
    if (!errors.empty()) {
        std::string all = "invalid config:";
        for (const auto& e : errors) all += "\n  - " + e;
        throw cdc::InvalidArgument(all);
    }
    return config;
}

int cmd_gen_corpus(const std::string& config_path, const std::string& out,
                   const std::string& kind_override, int count_override) {
    cdc::RunConfig config = load_config(config_path);
    cdc::mini::GenConfig gen = config.denoiser_corpus;
    if (!kind_override.empty()) gen.kind = cdc::mini::gen_kind_from_string(kind_override);
    if (count_override > 0) gen.count = count_override;

    const auto vocab = cdc::mini::default_vocab();
    cdc::SplitRng rng = cdc::SplitRng(config.seed).split(0xC0'7105ULL);
    const cdc::Corpus corpus = cdc::mini::gen_corpus(gen, vocab, config.registry, rng);

    std::ofstream file(out);
    for (const auto& e : corpus.programs) {
        json labels{{"functional", e.functional},
                    {"vulnerable", e.vulnerable},
                    {"family", e.family},
                    {"pattern", e.pattern}};
        std::vector<std::string> toks;
        for (int t : e.tokens) toks.push_back(vocab.token(t));
        file << json{{"tokens", toks}, {"labels", labels}}.dump() << '\n';
    }
    std::cout << "wrote " << corpus.size() << " programs to " << out << "\n";
    return 0;
}

cdc::Corpus load_corpus_jsonl(const std::string& path, const cdc::Vocabulary& vocab) {
    std::ifstream in(path);
    if (!in) throw cdc::InvalidArgument("cannot open corpus: " + path);
    json arr = json::array();
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) arr.push_back(json::parse(line));
    }
    return cdc::Corpus::from_json(arr, vocab);
}

int cmd_train_denoiser(const std::string& config_path, const std::string& corpus_path,
                       const std::string& out) {
    cdc::RunConfig config = load_config(config_path);
    const auto vocab = cdc::mini::default_vocab();
    cdc::Corpus corpus;
    if (corpus_path.empty()) {
        cdc::SplitRng rng = cdc::SplitRng(config.seed).split(0xC0'7105ULL);
        corpus = cdc::mini::gen_corpus(config.denoiser_corpus, vocab, config.registry, rng);
    } else {
        corpus = load_corpus_jsonl(corpus_path, vocab);
    }
    const auto model = cdc::NgramDenoiser::train(corpus, vocab, config.ngram);
    model.save(out);
    std::cout << "trained denoiser on " << corpus.size() << " programs -> " << out << "\n";
    return 0;
}

int cmd_train_surrogate(const std::string& config_path, const std::string& corpus_path,
                        const std::string& out) {
    cdc::RunConfig config = load_config(config_path);
    const auto vocab = cdc::mini::default_vocab();
    cdc::Corpus corpus;
    if (corpus_path.empty()) {
        cdc::SplitRng rng = cdc::SplitRng(config.seed).split(0x50'4706ULL);
        corpus = cdc::mini::gen_corpus(config.surrogate_corpus, vocab, config.registry, rng);
    } else {
        corpus = load_corpus_jsonl(corpus_path, vocab);
    }
    cdc::SurrogateTrainReport report;
    const auto model = cdc::SurrogateModel::train(corpus, vocab, config.surrogate, &report);
    model.save(out);
    std::cout << "trained surrogate on " << report.train_count << " programs, holdout AUC "
              << report.holdout_auc << " -> " << out << "\n";
    return 0;
}

int cmd_run(const std::string& config_path, const std::string& denoiser_path,
            const std::string& surrogate_path, bool train_surrogate_flag,
            const std::string& out_dir) {
    cdc::RunConfig config = load_config(config_path);
    if (!denoiser_path.empty()) config.denoiser_path = denoiser_path;
    if (!surrogate_path.empty()) config.surrogate_path = surrogate_path;
    if (train_surrogate_flag) config.surrogate_path.clear();
    if (!out_dir.empty()) config.out_dir = out_dir;

    const auto result = cdc::run_suite(config);
    std::cout << result.report_json.dump(2) << "\n";
    return 0;
}

int cmd_metrics(const std::string& traces_dir) {
    std::vector<cdc::TrajectoryTrace> traces;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(traces_dir))
        if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        std::ifstream in(f);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        traces.push_back(cdc::TrajectoryTrace::from_json_lines(text));
    }
    std::cout << cdc::metrics::aggregate(traces).to_json().dump(2) << "\n";
    return 0;
}

bool check(const std::string& name, bool ok) {
    std::cout << (ok ? "PASS  " : "FAIL  ") << name << "\n";
    return ok;
}

// Oracle-backed self checks, runnable without any config.
int cmd_verify() {
    using namespace cdc;
    bool all = true;
    const auto vocab = mini::default_vocab();

    {
        const auto sched = make_schedule(8, ScheduleKind::Linear);
        bool ok = true;
        for (int t = 1; t <= sched.T; ++t) {
            const auto [gamma, eta] = gamma_eta(sched, t);
            ok = ok && std::abs(gamma + eta - 1.0) < 1e-12;
        }
        all &= check("kernel coefficients: gamma + eta = 1", ok);
    }
    {
        const auto sched = make_schedule(4, ScheduleKind::Linear);
        Vocabulary tiny = Vocabulary::with_mask({"a", "b"});
        UniformDenoiser den(tiny);
        TokenState x0;
        x0.tokens.assign(1000, 0);
        x0.context = empty_context();
        SplitRng rng(7);
        int masked = 0;
        const int trials = 200;
        for (int i = 0; i < trials; ++i) {
            SplitRng r = rng.split(i);
            masked += forward_corrupt(x0, 2, sched, tiny.mask_id(), r).masked_count(tiny.mask_id());
        }
        const double rate = static_cast<double>(masked) / (1000.0 * trials);
        all &= check("forward corruption mask rate matches 1 - alpha_t", std::abs(rate - 0.5) < 0.02);
    }
    {
        Vocabulary tiny = Vocabulary::with_mask({"a", "b"});
        UniformDenoiser den(tiny);
        const auto sched = make_schedule(2, ScheduleKind::Linear);
        const auto exact = oracles::exact_posterior(den, sched, 2, empty_context());
        std::map<std::vector<int>, double> counts;
        const int runs = 50000;
        SplitRng root(11);
        for (int i = 0; i < runs; ++i) {
            SplitRng r = root.split(i);
            const auto s = sample_vanilla(den, empty_context(), 2, sched, r);
            counts[s.tokens] += 1.0 / runs;
        }
        all &= check("vanilla sampler matches exact enumeration (TV <= 0.02)",
                     oracles::tv_distance(exact, counts) <= 0.02);
        all &= check("enumeration mass is 1", std::abs(exact.total_mass() - 1.0) < 1e-9);
    }
    {
        SurrogateConfig cfg;
        cfg.seed = 3;
        const auto model = SurrogateModel::init(vocab, cfg);
        SplitRng rng(5);
        bool ok = true;
        double worst = 0.0;
        for (int trial = 0; trial < 20; ++trial) {
            const int L = 3;
            CleanProposal p;
            p.probs.setZero(L, vocab.size());
            for (int i = 0; i < L; ++i) {
                double z = 0.0;
                for (int v = 0; v < vocab.size(); ++v) {
                    if (v == vocab.mask_id()) continue;
                    p.probs(i, v) = rng.uniform();
                    z += p.probs(i, v);
                }
                p.probs.row(i) /= z;
            }
            const SoftEmbedding emb = soft_embed(p, model.embedding());
            const Eigen::MatrixXd analytic = model.grad_wrt_embeddings(emb, 0);
            Eigen::VectorXd flat(emb.size());
            Eigen::Map<Eigen::VectorXd>(flat.data(), emb.size()) =
                Eigen::Map<const Eigen::VectorXd>(emb.data(), emb.size());
            const auto f = [&](const Eigen::VectorXd& x) {
                SoftEmbedding e = Eigen::Map<const Eigen::MatrixXd>(x.data(), emb.rows(), emb.cols());
                const auto g = model.scores(e, 0);
                double total = 0.0;
                for (int j = 0; j < g.size(); ++j) total += std::max(0.0, model.tau()[j] - g[j]);
                return total;
            };
            const Eigen::VectorXd fd = oracles::fd_gradient(f, flat, 1e-5);
            const Eigen::Map<const Eigen::VectorXd> an(analytic.data(), analytic.size());
            const double scale = std::max(fd.cwiseAbs().maxCoeff(), 1e-8);
            worst = std::max(worst, (an - fd).cwiseAbs().maxCoeff() / scale);
        }
        ok = worst <= 1e-4;
        all &= check("surrogate gradients match finite differences (rel err <= 1e-4)", ok);
    }
    {
        // single-row linear penalty converges to the closed-form tilt
        const int V = vocab.size();
        SplitRng rng(9);
        Eigen::VectorXd base = Eigen::VectorXd::Zero(V);
        for (int v = 0; v < V; ++v)
            if (v != vocab.mask_id()) base[v] = 0.05 + rng.uniform();
        base /= base.sum();
        Eigen::VectorXd cost = Eigen::VectorXd::Zero(V);
        for (int v = 0; v < V; ++v)
            if (v != vocab.mask_id()) cost[v] = rng.uniform();

        CleanProposal p;
        p.probs = base.transpose();
        gradguide::AlmState state = gradguide::AlmState::make(1);
        state.lambda[0] = 1.3;
        state.mu[0] = 0.0;
        state.k_inner = 400;
        state.step_size = 1.0;
        gradguide::LinearPenalty penalty(cost.transpose());
        const auto y = gradguide::alm_project(p, EditRegion::from_positions({0}), state, penalty,
                                              vocab.mask_id());
        const auto tilt = oracles::tilt_closed_form(base, cost, 1.3);
        const double tv = 0.5 * (y.probs.row(0).transpose() - tilt).cwiseAbs().sum();
        all &= check("ALM projection matches closed-form tilt (TV <= 1e-3)", tv <= 1e-3);
    }
    {
        const auto registry = mini::default_registry();
        const auto vuln = mini::lex("let a = input ( ) ; exec ( a ) ;", vocab);
        const auto safe =
            mini::lex("let a = input ( ) ; let b = escape ( a ) ; check ( b ) ; exec ( b ) ;", vocab);
        all &= check("analyzer flags the tainted sink",
                     mdfi::has_witnesses(vuln, vocab, registry));
        all &= check("analyzer accepts the sanitized variant",
                     !mdfi::has_witnesses(safe, vocab, registry));
    }

    std::cout << (all ? "verify: all checks passed\n" : "verify: FAILURES present\n");
    return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"constrained masked-diffusion program sampler"};
    app.require_subcommand(1);

    std::string config_path, out, corpus_path, kind_override, traces_dir;
    std::string denoiser_path, surrogate_path, out_dir;
    bool train_surrogate_flag = false;
    int count_override = 0;

    auto* gen = app.add_subcommand("gen-corpus", "generate a labeled program corpus");
    gen->add_option("--config", config_path, "run config JSON");
    gen->add_option("--out", out, "output JSONL path")->required();
    gen->add_option("--kind", kind_override, "functional|security|mixed");
    gen->add_option("--count", count_override, "override program count");

    auto* td = app.add_subcommand("train-denoiser", "fit the n-gram denoiser");
    td->add_option("--config", config_path, "run config JSON");
    td->add_option("--corpus", corpus_path, "corpus JSONL (generated when omitted)");
    td->add_option("--out", out, "model output path")->required();

    auto* ts = app.add_subcommand("train-surrogate", "fit the correctness surrogate");
    ts->add_option("--config", config_path, "run config JSON");
    ts->add_option("--corpus", corpus_path, "corpus JSONL (generated when omitted)");
    ts->add_option("--out", out, "model output path")->required();

    auto* run = app.add_subcommand("run", "run a sampling suite and report metrics");
    run->add_option("--config", config_path, "run config JSON");
    run->add_option("--denoiser", denoiser_path, "denoiser model path");
    run->add_option("--surrogate", surrogate_path, "surrogate model path");
    run->add_flag("--train-surrogate", train_surrogate_flag, "retrain the surrogate before running");
    run->add_option("--out-dir", out_dir, "trace/report output directory");

    auto* verify = app.add_subcommand("verify", "run oracle-backed self checks");
    (void)verify;

    auto* met = app.add_subcommand("metrics", "recompute a report from trace files");
    met->add_option("--traces", traces_dir, "directory of .trace.jsonl files")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_corpus(config_path, out, kind_override, count_override);
        if (td->parsed()) return cmd_train_denoiser(config_path, corpus_path, out);
        if (ts->parsed()) return cmd_train_surrogate(config_path, corpus_path, out);
        if (run->parsed())
            return cmd_run(config_path, denoiser_path, surrogate_path, train_surrogate_flag, out_dir);
        if (verify->parsed()) return cmd_verify();
        if (met->parsed()) return cmd_metrics(traces_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
