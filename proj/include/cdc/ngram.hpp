#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "cdc/denoiser.hpp"

namespace cdc {

/// One training program plus labels produced by the execution and analysis
/// harnesses.
struct CorpusEntry {
    std::vector<int> tokens;
    bool functional = false;
    bool vulnerable = false;
    int family = 0;
    // Construction intent for security suites: "none", "vuln" or "safe".
    // The vulnerable flag above is what the witness detector reported.
    std::string pattern = "none";
};

struct Corpus {
    std::vector<CorpusEntry> programs;

    bool empty() const { return programs.empty(); }
    std::size_t size() const { return programs.size(); }

    nlohmann::json to_json(const Vocabulary& vocab) const;
    static Corpus from_json(const nlohmann::json& j, const Vocabulary& vocab);
};

struct NgramConfig {
    double smoothing = 0.1;
    int window = 4;        // neighbor search radius; beyond it bigrams fall back to unigram
    double w_unigram = 0.2;
    double w_left = 0.4;
    double w_right = 0.4;
    // Strength of the pseudo-counts contributed by a feedback message in the
    // context buffer, in units of training programs (1.0 = as if the message
    // pattern occurred once per corpus program). 0 disables hint conditioning.
    double hint_weight = 0.0;

    nlohmann::json to_json() const;
    static NgramConfig from_json(const nlohmann::json& j);
};

/// Position-and-neighborhood conditional categorical denoiser. Masked rows
/// mix a per-position unigram with neighbor terms conditioned on the nearest
/// committed token on each side together with its offset (tables are kept
/// per distance 1..window, which is what carries statement-local structure);
/// committed rows are one-hot.
class NgramDenoiser final : public Denoiser {
public:
    static NgramDenoiser train(const Corpus& corpus, const Vocabulary& vocab, NgramConfig config);

    CleanProposal predict(const TokenState& state, int t) const override;
    const Vocabulary& vocab() const override { return vocab_; }

    const NgramConfig& config() const { return config_; }

    /// Smoothed adjacent-bigram conditional P(v | previous committed token u).
    Eigen::VectorXd left_conditional(int u) const;

    /// Average per-token perplexity of leave-one-out predictions over a corpus.
    double perplexity(const Corpus& corpus) const;

    void save(const std::string& path) const;
    static NgramDenoiser load(const std::string& path);

    nlohmann::json to_json() const;
    static NgramDenoiser from_json(const nlohmann::json& j);

private:
    NgramDenoiser(Vocabulary vocab, NgramConfig config)
        : vocab_(std::move(vocab)), config_(config) {}

    Eigen::VectorXd masked_row(const std::vector<int>& tokens, int pos,
                               const std::vector<Eigen::MatrixXd>& left,
                               const std::vector<Eigen::MatrixXd>& right,
                               const Eigen::VectorXd& hint_uni) const;

    Vocabulary vocab_;
    NgramConfig config_;
    double trained_programs_ = 0.0;
    Eigen::MatrixXd pos_unigram_;     // max_len x V counts
    Eigen::VectorXd global_unigram_;  // V counts
    // index d-1 holds co-occurrence counts at offset d
    std::vector<Eigen::MatrixXd> bigram_left_;   // row u = counts of v at u's right, offset d
    std::vector<Eigen::MatrixXd> bigram_right_;  // row w = counts of v at w's left, offset d
};

}  // namespace cdc
