#include "cdc/runner.hpp"

#include <filesystem>
#include <fstream>

#include "cdc/errors.hpp"
#include "cdc/mini/interp.hpp"
#include "cdc/mini/lexer.hpp"
#include "cdc/mini/parser.hpp"

namespace cdc {

namespace fs = std::filesystem;

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j{{"seed", seed},
                     {"schedule", {{"T", T}, {"kind", cdc::to_string(schedule_kind)}}},
                     {"length", length},
                     {"operator", operator_name},
                     {"gradguide", gradguide.to_json()},
                     {"mdfi", mdfi.to_json()},
                     {"registry", registry.to_json()},
                     {"suite",
                      {{"kind", suite_kind}, {"tasks", tasks}, {"target", target}, {"family", family}}},
                     {"out_dir", out_dir}};
    j["denoiser"] = {{"path", denoiser_path},
                     {"train", {{"corpus", denoiser_corpus.to_json()}, {"ngram", ngram.to_json()}}}};
    j["surrogate"] = {{"path", surrogate_path},
                      {"train", {{"corpus", surrogate_corpus.to_json()}, {"model", surrogate.to_json()}}}};
    return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig c;
    c.seed = j.value("seed", c.seed);
    if (j.contains("schedule")) {
        c.T = j["schedule"].value("T", c.T);
        c.schedule_kind = schedule_kind_from_string(j["schedule"].value("kind", std::string("linear")));
    }
    c.length = j.value("length", c.length);
    c.operator_name = j.value("operator", c.operator_name);
    if (j.contains("denoiser")) {
        const auto& d = j["denoiser"];
        c.denoiser_path = d.value("path", std::string());
        if (d.contains("train")) {
            if (d["train"].contains("corpus"))
                c.denoiser_corpus = mini::GenConfig::from_json(d["train"]["corpus"]);
            if (d["train"].contains("ngram")) c.ngram = NgramConfig::from_json(d["train"]["ngram"]);
        }
    }
    if (j.contains("surrogate")) {
        const auto& s = j["surrogate"];
        c.surrogate_path = s.value("path", std::string());
        if (s.contains("train")) {
            if (s["train"].contains("corpus"))
                c.surrogate_corpus = mini::GenConfig::from_json(s["train"]["corpus"]);
            if (s["train"].contains("model"))
                c.surrogate = SurrogateConfig::from_json(s["train"]["model"]);
        }
    }
    if (j.contains("gradguide")) c.gradguide = gradguide::GradGuideConfig::from_json(j["gradguide"]);
    if (j.contains("mdfi")) c.mdfi = mdfi::MdfiConfig::from_json(j["mdfi"]);
    if (j.contains("registry")) c.registry = mini::FunctionRegistry::from_json(j["registry"]);
    if (j.contains("suite")) {
        const auto& s = j["suite"];
        c.suite_kind = s.value("kind", c.suite_kind);
        c.tasks = s.value("tasks", c.tasks);
        c.target = s.value("target", c.target);
        c.family = s.value("family", c.family);
    }
    c.out_dir = j.value("out_dir", c.out_dir);
    return c;
}

std::vector<std::string> RunConfig::validate() const {
    std::vector<std::string> errors;
    if (T < 1) errors.push_back("schedule.T must be >= 1");
    if (length < 1) errors.push_back("length must be >= 1");
    if (tasks < 1) errors.push_back("suite.tasks must be >= 1");
    if (target < 0 || target > 9) errors.push_back("suite.target must be a digit 0..9");
    static const std::vector<std::string> ops = {"none", "gradguide", "mdfi", "both", "resample"};
    if (std::find(ops.begin(), ops.end(), operator_name) == ops.end())
        errors.push_back("operator must be one of none|gradguide|mdfi|both|resample");
    if (suite_kind != "functional" && suite_kind != "security")
        errors.push_back("suite.kind must be functional or security");
    if (!denoiser_path.empty() && !fs::exists(denoiser_path))
        errors.push_back("denoiser.path does not exist: " + denoiser_path);
    if (!surrogate_path.empty() && !fs::exists(surrogate_path))
        errors.push_back("surrogate.path does not exist: " + surrogate_path);
    try {
        registry.validate();
    } catch (const std::exception& e) {
        errors.push_back(e.what());
    }
    if (mdfi.rho_min < 0.0 || mdfi.rho_min >= 1.0) errors.push_back("mdfi.rho_min must be in [0,1)");
    if (mdfi.b_int < 0 || mdfi.k_insert < 0 || mdfi.b_p < 0 || mdfi.b_tok < 0)
        errors.push_back("mdfi budgets must be nonnegative");
    if (gradguide.saliency.k < 1) errors.push_back("gradguide.k must be >= 1");
    if (gradguide.budget < 0) errors.push_back("gradguide.budget must be >= 0");

    const double mix = ngram.w_unigram + ngram.w_left + ngram.w_right;
    if (ngram.w_unigram < 0 || ngram.w_left < 0 || ngram.w_right < 0 || std::abs(mix - 1.0) > 1e-9)
        errors.push_back("denoiser.train.ngram mix weights must be nonnegative and sum to 1");
    if (ngram.smoothing <= 0) errors.push_back("denoiser.train.ngram smoothing must be > 0");
    if (ngram.window < 1) errors.push_back("denoiser.train.ngram window must be >= 1");
    if (ngram.hint_weight < 0) errors.push_back("denoiser.train.ngram hint_weight must be >= 0");

    for (const auto* corpus : {&denoiser_corpus, &surrogate_corpus}) {
        if (corpus->count < 1) errors.push_back("corpus count must be >= 1");
        for (double rate : {corpus->correct_rate, corpus->vuln_rate, corpus->security_rate})
            if (rate < 0.0 || rate > 1.0) errors.push_back("corpus rates must be in [0,1]");
    }
    if (wants_surrogate()) {
        if (surrogate.epochs < 0) errors.push_back("surrogate epochs must be >= 0");
        for (double t : surrogate.tau)
            if (!(t > 0.0 && t <= 1.0)) errors.push_back("surrogate tau must be in (0,1]");
    }
    return errors;
}

bool functional_verdict(const std::vector<int>& tokens, const Vocabulary& vocab,
                        const mini::FunctionRegistry& registry, int target) {
    try {
        const mini::Program prog = mini::parse_strict(tokens, vocab, registry);
        return mini::functional_pass(mini::interpret(prog, {}), target);
    } catch (const std::exception&) {
        return false;
    }
}

bool security_verdict(const std::vector<int>& tokens, const Vocabulary& vocab,
                      const mini::FunctionRegistry& registry) {
    return !mdfi::has_witnesses(tokens, vocab, registry);
}

SuiteModels prepare_models(const RunConfig& config) {
    const Vocabulary vocab = mini::default_vocab();
    SuiteModels models;

    if (!config.denoiser_path.empty()) {
        models.denoiser = std::make_shared<NgramDenoiser>(NgramDenoiser::load(config.denoiser_path));
    } else {
        SplitRng rng(config.seed);
        SplitRng corpus_rng = rng.split(0xC0'7105ULL);
        const Corpus corpus = mini::gen_corpus(config.denoiser_corpus, vocab, config.registry, corpus_rng);
        models.denoiser =
            std::make_shared<NgramDenoiser>(NgramDenoiser::train(corpus, vocab, config.ngram));
    }

    if (config.wants_surrogate()) {
        if (!config.surrogate_path.empty()) {
            models.surrogate = std::make_shared<SurrogateModel>(SurrogateModel::load(config.surrogate_path));
        } else {
            SplitRng rng(config.seed);
            SplitRng corpus_rng = rng.split(0x50'4706ULL);
            const Corpus corpus =
                mini::gen_corpus(config.surrogate_corpus, vocab, config.registry, corpus_rng);
            models.surrogate = std::make_shared<SurrogateModel>(
                SurrogateModel::train(corpus, vocab, config.surrogate, &models.surrogate_report));
        }
    }
    return models;
}

namespace {

std::unique_ptr<Operator> make_gradguide(const RunConfig& config, const SuiteModels& models,
                                         const Vocabulary& vocab) {
    auto exact = [&config, &vocab, registry = config.registry](
                     const std::vector<int>& tokens) -> std::optional<bool> {
        if (config.suite_kind == "security") return !mdfi::has_witnesses(tokens, vocab, registry);
        try {
            const mini::Program prog = mini::parse_strict(tokens, vocab, registry);
            return mini::functional_pass(mini::interpret(prog, {}), config.target);
        } catch (const std::exception&) {
            return std::nullopt;  // not executable, fall back to the surrogate
        }
    };
    return std::make_unique<gradguide::GradGuideOperator>(*models.surrogate, vocab, config.registry,
                                                          config.gradguide, config.family, exact);
}

}  // namespace

SuiteResult run_suite(const RunConfig& config) { return run_suite(config, prepare_models(config)); }

SuiteResult run_suite(const RunConfig& config, const SuiteModels& models) {
    const auto errors = config.validate();
    if (!errors.empty()) {
        std::string all = "invalid config:";
        for (const auto& e : errors) all += "\n  - " + e;
        throw InvalidArgument(all);
    }
    if (config.wants_surrogate() && !models.surrogate)
        throw InvalidArgument("operator " + config.operator_name + " needs a surrogate model");

    const Vocabulary& vocab = models.denoiser->vocab();
    const int mask = vocab.mask_id();
    const NoiseSchedule schedule = make_schedule(config.T, config.schedule_kind);

    mdfi::MdfiConfig mdfi_config = config.mdfi;
    if (mdfi_config.checkpoints.empty()) mdfi_config.checkpoints = mdfi::default_checkpoints(config.T);

    const int buffer_len = config.wants_mdfi() ? mdfi_config.b_p : 0;

    SuiteResult result;
    result.traces.reserve(static_cast<std::size_t>(config.tasks));
    SplitRng root(config.seed);

    for (int task = 0; task < config.tasks; ++task) {
        SplitRng rng = root.split(1000 + static_cast<std::uint64_t>(task));
        ContextPtr ctx = make_context({}, buffer_len, mask, config.family);

        std::unique_ptr<Operator> gg;
        std::unique_ptr<Operator> md;
        std::vector<Operator*> chain;
        if (config.operator_name == "gradguide" || config.operator_name == "both") {
            gg = make_gradguide(config, models, vocab);
            chain.push_back(gg.get());
        }
        if (config.operator_name == "mdfi" || config.operator_name == "both") {
            md = std::make_unique<mdfi::MdfiOperator>(*models.denoiser, config.registry, mdfi_config);
            chain.push_back(md.get());
        }
        IdentityOperator identity;
        CompositeOperator composite(chain);
        Operator& op = chain.empty() ? static_cast<Operator&>(identity)
                                     : static_cast<Operator&>(composite);

        auto [final_state, trace] = run_constrained(*models.denoiser, op, ctx, config.length,
                                                    schedule, rng);

        bool functional = functional_verdict(final_state.tokens, vocab, config.registry, config.target);
        bool security = security_verdict(final_state.tokens, vocab, config.registry);
        trace.final_verdicts = {{"functional", functional}, {"security", security}};

        if (config.operator_name == "resample") {
            const bool first_ok = config.suite_kind == "security" ? security : functional;
            if (!first_ok) {
                SplitRng retry_rng = root.split(500000 + static_cast<std::uint64_t>(task));
                const TokenState second =
                    sample_vanilla(*models.denoiser, ctx, config.length, schedule, retry_rng);
                functional = functional_verdict(second.tokens, vocab, config.registry, config.target);
                security = security_verdict(second.tokens, vocab, config.registry);
                trace.final_verdicts = {{"functional", functional},
                                        {"security", security},
                                        {"resampled", true},
                                        {"regenerated_tokens", second.tokens.size()},
                                        {"first_functional", trace.final_verdicts["functional"]},
                                        {"first_security", trace.final_verdicts["security"]}};
                trace.final_tokens = second.tokens;
            }
        }
        result.traces.push_back(std::move(trace));
    }

    result.report = metrics::aggregate(result.traces);
    result.report_json = result.report.to_json();
    result.report_json["config"] = config.to_json();
    if (!models.surrogate_report.epoch_losses.empty())
        result.report_json["surrogate_holdout_auc"] = models.surrogate_report.holdout_auc;

    // resample baseline bookkeeping: every regenerated program counts in full
    std::vector<double> regenerated;
    for (const auto& trace : result.traces)
        if (trace.final_verdicts.value("resampled", false))
            regenerated.push_back(trace.final_verdicts["regenerated_tokens"].get<double>());
    if (!regenerated.empty()) {
        result.report_json["resample"] = {{"count", regenerated.size()},
                                          {"regenerated_tokens_median", metrics::median(regenerated)}};
    }

    if (!config.out_dir.empty()) {
        fs::create_directories(config.out_dir);
        for (std::size_t i = 0; i < result.traces.size(); ++i) {
            std::ofstream out(fs::path(config.out_dir) /
                              ("task_" + std::to_string(i) + ".trace.jsonl"));
            out << result.traces[i].to_json_lines();
            std::ofstream program(fs::path(config.out_dir) / ("task_" + std::to_string(i) + ".mini"));
            program << mini::detok(result.traces[i].final_tokens, vocab) << '\n';
        }
        std::ofstream report(fs::path(config.out_dir) / "report.json");
        report << result.report_json.dump(2) << '\n';
    }
    return result;
}

}  // namespace cdc
