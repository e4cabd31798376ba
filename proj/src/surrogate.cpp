#include "cdc/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "cdc/errors.hpp"
#include "cdc/rng.hpp"

namespace cdc {

namespace {

constexpr int kModelVersion = 1;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Eigen::MatrixXd uniform_matrix(int rows, int cols, SplitRng& rng) {
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform() * 0.2 - 0.1;
    return m;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(m.rows()));
    for (int r = 0; r < m.rows(); ++r) {
        auto& row = rows[static_cast<std::size_t>(r)];
        row.resize(static_cast<std::size_t>(m.cols()));
        for (int c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    }
    return nlohmann::json(rows);
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.get<std::vector<std::vector<double>>>();
    if (rows.empty()) return Eigen::MatrixXd(0, 0);
    Eigen::MatrixXd m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c)
            m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    return m;
}

}  // namespace

SoftEmbedding soft_embed(const CleanProposal& proposal, const EmbeddingTable& table) {
    if (proposal.vocab_size() != table.vocab_size())
        throw InvalidArgument("soft_embed: proposal columns do not match embedding rows");
    return proposal.probs * table.rows;
}

nlohmann::json SurrogateConfig::to_json() const {
    return {{"embed_dim", embed_dim},
            {"hidden", hidden},
            {"constraints", constraints},
            {"families", families},
            {"tau", tau},
            {"seed", seed},
            {"learning_rate", learning_rate},
            {"momentum", momentum},
            {"epochs", epochs},
            {"holdout_fraction", holdout_fraction}};
}

SurrogateConfig SurrogateConfig::from_json(const nlohmann::json& j) {
    SurrogateConfig c;
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.hidden = j.value("hidden", c.hidden);
    c.constraints = j.value("constraints", c.constraints);
    c.families = j.value("families", c.families);
    if (j.contains("tau")) c.tau = j["tau"].get<std::vector<double>>();
    c.seed = j.value("seed", c.seed);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.momentum = j.value("momentum", c.momentum);
    c.epochs = j.value("epochs", c.epochs);
    c.holdout_fraction = j.value("holdout_fraction", c.holdout_fraction);
    return c;
}

SurrogateModel SurrogateModel::init(const Vocabulary& vocab, SurrogateConfig config) {
    if (config.embed_dim < 2) throw InvalidArgument("surrogate: embed_dim must be >= 2");
    if (config.constraints < 1 || static_cast<int>(config.tau.size()) != config.constraints)
        throw InvalidArgument("surrogate: need one tau per constraint");
    for (double t : config.tau)
        if (!(t > 0.0 && t <= 1.0)) throw InvalidArgument("surrogate: tau must be in (0, 1]");

    SplitRng rng(config.seed);
    SurrogateModel m;
    m.config_ = config;
    m.embedding_.rows = uniform_matrix(vocab.size(), config.embed_dim, rng);
    m.context_ = uniform_matrix(std::max(1, config.families), config.embed_dim, rng);
    m.w1_ = uniform_matrix(config.hidden, 2 * config.embed_dim, rng);
    m.b1_ = uniform_matrix(config.hidden, 1, rng).col(0);
    m.w2_ = uniform_matrix(config.constraints, config.hidden, rng);
    m.b2_ = uniform_matrix(config.constraints, 1, rng).col(0);
    return m;
}

Eigen::VectorXd SurrogateModel::scores(const SoftEmbedding& emb, int family) const {
    if (emb.cols() != config_.embed_dim) throw InvalidArgument("scores: embedding dim mismatch");
    if (family < 0 || family >= context_.rows()) throw InvalidArgument("scores: unknown family");
    Eigen::VectorXd z(2 * config_.embed_dim);
    z.head(config_.embed_dim) = emb.colwise().mean();
    z.tail(config_.embed_dim) = context_.row(family);
    const Eigen::VectorXd hv = (w1_ * z + b1_).array().tanh();
    Eigen::VectorXd g = w2_ * hv + b2_;
    for (int j = 0; j < g.size(); ++j) g[j] = sigmoid(g[j]);
    return g;
}

std::pair<Eigen::VectorXd, double> SurrogateModel::violation(const CleanProposal& proposal,
                                                             int family) const {
    const Eigen::VectorXd g = scores(soft_embed(proposal, embedding_), family);
    Eigen::VectorXd dg(g.size());
    for (int j = 0; j < g.size(); ++j) dg[j] = std::max(0.0, config_.tau[static_cast<std::size_t>(j)] - g[j]);
    return {dg, dg.sum()};
}

Eigen::MatrixXd SurrogateModel::grad_wrt_embeddings(const SoftEmbedding& emb, int family,
                                                    const Eigen::VectorXd& coeff) const {
    if (coeff.size() != config_.constraints) throw InvalidArgument("grad: coeff size mismatch");
    const int L = static_cast<int>(emb.rows());
    const int d = config_.embed_dim;

    Eigen::VectorXd z(2 * d);
    z.head(d) = emb.colwise().mean();
    z.tail(d) = context_.row(family);
    const Eigen::VectorXd q = w1_ * z + b1_;
    const Eigen::VectorXd hv = q.array().tanh();
    const Eigen::VectorXd sech2 = 1.0 - hv.array().square();

    // d/dq of sum_j coeff_j * max(0, tau_j - g_j); the kink contributes 0
    Eigen::VectorXd dq = Eigen::VectorXd::Zero(q.size());
    for (int j = 0; j < config_.constraints; ++j) {
        const double g = sigmoid(w2_.row(j).dot(hv) + b2_[j]);
        if (g >= config_.tau[static_cast<std::size_t>(j)]) continue;
        const double dg = -coeff[j] * g * (1.0 - g);
        dq += dg * (w2_.row(j).transpose().array() * sech2.array()).matrix();
    }
    const Eigen::VectorXd dz = w1_.transpose() * dq;
    const Eigen::RowVectorXd dpool = dz.head(d).transpose() / static_cast<double>(L);

    Eigen::MatrixXd out(L, d);
    out.rowwise() = dpool;  // mean pooling spreads the same gradient to every row
    return out;
}

Eigen::MatrixXd SurrogateModel::grad_wrt_embeddings(const SoftEmbedding& emb, int family) const {
    return grad_wrt_embeddings(emb, family, Eigen::VectorXd::Ones(config_.constraints));
}

Eigen::MatrixXd SurrogateModel::grad_wrt_proposal(const CleanProposal& proposal, int family,
                                                  const Eigen::VectorXd& coeff) const {
    const Eigen::MatrixXd demb = grad_wrt_embeddings(soft_embed(proposal, embedding_), family, coeff);
    return demb * embedding_.rows.transpose();  // chain rule through fixed E
}

SurrogateModel SurrogateModel::train(const Corpus& corpus, const Vocabulary& vocab,
                                     SurrogateConfig config, SurrogateTrainReport* report) {
    if (corpus.empty()) throw InvalidArgument("train_surrogate: empty corpus");

    const int n = static_cast<int>(corpus.size());
    const int holdout = std::min(n - 1, static_cast<int>(std::lround(n * config.holdout_fraction)));
    const int train_n = n - holdout;

    int pos = 0;
    for (int i = 0; i < train_n; ++i) pos += corpus.programs[static_cast<std::size_t>(i)].functional ? 1 : 0;
    const int neg = train_n - pos;
    if (pos == 0 || neg == 0) throw InvalidArgument("train_surrogate: corpus labels are single-class");
    const double w_pos = static_cast<double>(train_n) / (2.0 * pos);
    const double w_neg = static_cast<double>(train_n) / (2.0 * neg);

    SurrogateModel m = init(vocab, config);
    const int d = config.embed_dim;
    const int h = config.hidden;
    const int mm = config.constraints;

    Eigen::MatrixXd vE = Eigen::MatrixXd::Zero(vocab.size(), d);
    Eigen::MatrixXd vC = Eigen::MatrixXd::Zero(m.context_.rows(), d);
    Eigen::MatrixXd vW1 = Eigen::MatrixXd::Zero(h, 2 * d);
    Eigen::VectorXd vb1 = Eigen::VectorXd::Zero(h);
    Eigen::MatrixXd vW2 = Eigen::MatrixXd::Zero(mm, h);
    Eigen::VectorXd vb2 = Eigen::VectorXd::Zero(mm);

    if (report) {
        report->train_count = train_n;
        report->holdout_count = holdout;
    }

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Eigen::MatrixXd gE = Eigen::MatrixXd::Zero(vocab.size(), d);
        Eigen::MatrixXd gC = Eigen::MatrixXd::Zero(m.context_.rows(), d);
        Eigen::MatrixXd gW1 = Eigen::MatrixXd::Zero(h, 2 * d);
        Eigen::VectorXd gb1 = Eigen::VectorXd::Zero(h);
        Eigen::MatrixXd gW2 = Eigen::MatrixXd::Zero(mm, h);
        Eigen::VectorXd gb2 = Eigen::VectorXd::Zero(mm);
        double loss = 0.0;

        for (int i = 0; i < train_n; ++i) {
            const auto& e = corpus.programs[static_cast<std::size_t>(i)];
            const double y = e.functional ? 1.0 : 0.0;
            const double w = (e.functional ? w_pos : w_neg) / train_n;
            const int L = static_cast<int>(e.tokens.size());
            const int fam = std::clamp(e.family, 0, static_cast<int>(m.context_.rows()) - 1);

            Eigen::VectorXd z(2 * d);
            Eigen::VectorXd pool = Eigen::VectorXd::Zero(d);
            for (int tok : e.tokens) pool += m.embedding_.rows.row(tok).transpose();
            pool /= static_cast<double>(L);
            z.head(d) = pool;
            z.tail(d) = m.context_.row(fam);

            const Eigen::VectorXd q = m.w1_ * z + m.b1_;
            const Eigen::VectorXd hv = q.array().tanh();
            const Eigen::VectorXd sech2 = 1.0 - hv.array().square();

            Eigen::VectorXd delta(mm);  // d(loss)/d(pre-sigmoid output)
            for (int j = 0; j < mm; ++j) {
                const double g = sigmoid(m.w2_.row(j).dot(hv) + m.b2_[j]);
                loss += -w * (y * std::log(std::max(g, 1e-12)) +
                              (1.0 - y) * std::log(std::max(1.0 - g, 1e-12)));
                delta[j] = w * (g - y);
            }

            gW2 += delta * hv.transpose();
            gb2 += delta;
            const Eigen::VectorXd dq = (m.w2_.transpose() * delta).array() * sech2.array();
            gW1 += dq * z.transpose();
            gb1 += dq;
            const Eigen::VectorXd dz = m.w1_.transpose() * dq;
            const Eigen::VectorXd dpool = dz.head(d) / static_cast<double>(L);
            for (int tok : e.tokens) gE.row(tok) += dpool.transpose();
            gC.row(fam) += dz.tail(d).transpose();
        }

        vE = config.momentum * vE - config.learning_rate * gE;
        vC = config.momentum * vC - config.learning_rate * gC;
        vW1 = config.momentum * vW1 - config.learning_rate * gW1;
        vb1 = config.momentum * vb1 - config.learning_rate * gb1;
        vW2 = config.momentum * vW2 - config.learning_rate * gW2;
        vb2 = config.momentum * vb2 - config.learning_rate * gb2;
        m.embedding_.rows += vE;
        m.context_ += vC;
        m.w1_ += vW1;
        m.b1_ += vb1;
        m.w2_ += vW2;
        m.b2_ += vb2;

        if (report) report->epoch_losses.push_back(loss);
    }

    if (report && holdout > 0) {
        std::vector<double> scores;
        std::vector<int> labels;
        for (int i = train_n; i < n; ++i) {
            const auto& e = corpus.programs[static_cast<std::size_t>(i)];
            const CleanProposal p = one_hot_proposal(e.tokens, vocab.size());
            const int fam = std::clamp(e.family, 0, static_cast<int>(m.context_.rows()) - 1);
            scores.push_back(m.score(soft_embed(p, m.embedding_), fam));
            labels.push_back(e.functional ? 1 : 0);
        }
        report->holdout_auc = auc_score(scores, labels);
    }
    return m;
}

double auc_score(const std::vector<double>& scores, const std::vector<int>& labels) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // midranks for ties
    std::vector<double> rank(scores.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double mid = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
        i = j + 1;
    }

    double pos_rank_sum = 0.0;
    long long pos = 0, neg = 0;
    for (std::size_t k = 0; k < labels.size(); ++k) {
        if (labels[k]) {
            pos_rank_sum += rank[k];
            ++pos;
        } else {
            ++neg;
        }
    }
    if (pos == 0 || neg == 0) return 0.5;
    const double u = pos_rank_sum - static_cast<double>(pos) * (pos + 1) / 2.0;
    return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

bool SurrogateModel::operator==(const SurrogateModel& other) const {
    return embedding_.rows == other.embedding_.rows && context_ == other.context_ &&
           w1_ == other.w1_ && b1_ == other.b1_ && w2_ == other.w2_ && b2_ == other.b2_;
}

nlohmann::json SurrogateModel::to_json() const {
    return {{"version", kModelVersion},
            {"config", config_.to_json()},
            {"embedding", matrix_to_json(embedding_.rows)},
            {"context", matrix_to_json(context_)},
            {"w1", matrix_to_json(w1_)},
            {"b1", std::vector<double>(b1_.data(), b1_.data() + b1_.size())},
            {"w2", matrix_to_json(w2_)},
            {"b2", std::vector<double>(b2_.data(), b2_.data() + b2_.size())}};
}

SurrogateModel SurrogateModel::from_json(const nlohmann::json& j) {
    if (j.at("version").get<int>() != kModelVersion)
        throw InvalidArgument("surrogate file version mismatch");
    SurrogateModel m;
    m.config_ = SurrogateConfig::from_json(j.at("config"));
    m.embedding_.rows = matrix_from_json(j.at("embedding"));
    m.context_ = matrix_from_json(j.at("context"));
    m.w1_ = matrix_from_json(j.at("w1"));
    const auto b1 = j.at("b1").get<std::vector<double>>();
    m.b1_ = Eigen::Map<const Eigen::VectorXd>(b1.data(), static_cast<int>(b1.size()));
    m.w2_ = matrix_from_json(j.at("w2"));
    const auto b2 = j.at("b2").get<std::vector<double>>();
    m.b2_ = Eigen::Map<const Eigen::VectorXd>(b2.data(), static_cast<int>(b2.size()));
    return m;
}

void SurrogateModel::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot open for write: " + path);
    out << to_json().dump();
}

SurrogateModel SurrogateModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open surrogate file: " + path);
    nlohmann::json j;
    in >> j;
    return from_json(j);
}

}  // namespace cdc
