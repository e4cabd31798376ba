#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "cdc/ngram.hpp"
#include "cdc/proposal.hpp"

namespace cdc {

/// Token embedding matrix, |V| rows by d columns.
struct EmbeddingTable {
    Eigen::MatrixXd rows;

    int vocab_size() const { return static_cast<int>(rows.rows()); }
    int dim() const { return static_cast<int>(rows.cols()); }
};

/// L x d matrix; row i is the proposal-weighted average of token embeddings.
using SoftEmbedding = Eigen::MatrixXd;

/// Row i = sum_v proposal[i][v] * e_v.
SoftEmbedding soft_embed(const CleanProposal& proposal, const EmbeddingTable& table);

struct SurrogateConfig {
    int embed_dim = 16;
    int hidden = 32;
    int constraints = 1;
    int families = 1;
    std::vector<double> tau{0.8};  // satisfaction threshold per constraint
    std::uint64_t seed = 1;
    double learning_rate = 0.5;
    double momentum = 0.9;
    int epochs = 300;
    double holdout_fraction = 0.2;

    nlohmann::json to_json() const;
    static SurrogateConfig from_json(const nlohmann::json& j);
};

struct SurrogateTrainReport {
    std::vector<double> epoch_losses;
    double holdout_auc = 0.0;
    int train_count = 0;
    int holdout_count = 0;
};

/// Differentiable correctness scorer: mean-pooled soft embeddings
/// concatenated with a per-family context vector, one tanh hidden layer,
/// sigmoid output per constraint. All gradients are analytic.
class SurrogateModel {
public:
    /// Seeded uniform(-0.1, 0.1) initialization of every parameter.
    static SurrogateModel init(const Vocabulary& vocab, SurrogateConfig config);

    /// Class-balanced binary cross-entropy on execution labels, full-batch
    /// gradient descent with momentum. Throws when the corpus is single-class.
    static SurrogateModel train(const Corpus& corpus, const Vocabulary& vocab,
                                SurrogateConfig config, SurrogateTrainReport* report = nullptr);

    /// Per-constraint satisfaction scores in (0, 1).
    Eigen::VectorXd scores(const SoftEmbedding& emb, int family) const;

    /// Score of constraint 0 (the common single-constraint case).
    double score(const SoftEmbedding& emb, int family) const { return scores(emb, family)[0]; }

    /// Hinge violations at the proposal: (per-constraint max(0, tau_j - g_j),
    /// their sum).
    std::pair<Eigen::VectorXd, double> violation(const CleanProposal& proposal, int family) const;

    /// Gradient of sum_j coeff_j * max(0, tau_j - g_j) with respect to each
    /// soft-embedding row. The subgradient at the hinge kink is 0.
    Eigen::MatrixXd grad_wrt_embeddings(const SoftEmbedding& emb, int family,
                                        const Eigen::VectorXd& coeff) const;
    Eigen::MatrixXd grad_wrt_embeddings(const SoftEmbedding& emb, int family) const;

    /// Same gradient chained onto proposal entries (through the embedding
    /// table, which stays fixed).
    Eigen::MatrixXd grad_wrt_proposal(const CleanProposal& proposal, int family,
                                      const Eigen::VectorXd& coeff) const;

    const EmbeddingTable& embedding() const { return embedding_; }
    const std::vector<double>& tau() const { return config_.tau; }
    int constraints() const { return config_.constraints; }
    const SurrogateConfig& config() const { return config_; }

    void save(const std::string& path) const;
    static SurrogateModel load(const std::string& path);
    nlohmann::json to_json() const;
    static SurrogateModel from_json(const nlohmann::json& j);

    bool operator==(const SurrogateModel& other) const;

private:
    SurrogateModel() = default;

    SurrogateConfig config_;
    EmbeddingTable embedding_;   // V x d
    Eigen::MatrixXd context_;    // families x d
    Eigen::MatrixXd w1_;         // hidden x 2d
    Eigen::VectorXd b1_;         // hidden
    Eigen::MatrixXd w2_;         // m x hidden
    Eigen::VectorXd b2_;         // m
};

/// Rank-based AUC of scores against binary labels.
double auc_score(const std::vector<double>& scores, const std::vector<int>& labels);

}  // namespace cdc
