#include "cdc/ngram.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "cdc/errors.hpp"

namespace cdc {

namespace {

constexpr int kModelVersion = 1;

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.get<std::vector<std::vector<double>>>();
    if (rows.empty()) return Eigen::MatrixXd(0, 0);
    Eigen::MatrixXd m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    return m;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(m.rows()));
    for (int r = 0; r < m.rows(); ++r) {
        rows[static_cast<std::size_t>(r)].resize(static_cast<std::size_t>(m.cols()));
        for (int c = 0; c < m.cols(); ++c) rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = m(r, c);
    }
    return nlohmann::json(rows);
}

}  // namespace

nlohmann::json Corpus::to_json(const Vocabulary& vocab) const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : programs) {
        std::vector<std::string> toks;
        toks.reserve(e.tokens.size());
        for (int t : e.tokens) toks.push_back(vocab.token(t));
        arr.push_back({{"tokens", toks},
                       {"labels",
                        {{"functional", e.functional},
                         {"vulnerable", e.vulnerable},
                         {"family", e.family},
                         {"pattern", e.pattern}}}});
    }
    return arr;
}

Corpus Corpus::from_json(const nlohmann::json& j, const Vocabulary& vocab) {
    Corpus c;
    for (const auto& item : j) {
        CorpusEntry e;
        for (const auto& tok : item.at("tokens")) e.tokens.push_back(vocab.id_or_throw(tok.get<std::string>()));
        if (item.contains("labels")) {
            const auto& l = item["labels"];
            e.functional = l.value("functional", false);
            e.vulnerable = l.value("vulnerable", false);
            e.family = l.value("family", 0);
            e.pattern = l.value("pattern", std::string("none"));
        }
        c.programs.push_back(std::move(e));
    }
    return c;
}

nlohmann::json NgramConfig::to_json() const {
    return {{"smoothing", smoothing}, {"window", window},   {"w_unigram", w_unigram},
            {"w_left", w_left},       {"w_right", w_right}, {"hint_weight", hint_weight}};
}

NgramConfig NgramConfig::from_json(const nlohmann::json& j) {
    NgramConfig c;
    c.smoothing = j.value("smoothing", c.smoothing);
    c.window = j.value("window", c.window);
    c.w_unigram = j.value("w_unigram", c.w_unigram);
    c.w_left = j.value("w_left", c.w_left);
    c.w_right = j.value("w_right", c.w_right);
    c.hint_weight = j.value("hint_weight", c.hint_weight);
    return c;
}

NgramDenoiser NgramDenoiser::train(const Corpus& corpus, const Vocabulary& vocab, NgramConfig config) {
    if (corpus.empty()) throw InvalidArgument("train: empty corpus");
    if (config.w_unigram < 0 || config.w_left < 0 || config.w_right < 0)
        throw InvalidArgument("train: mix weights must be nonnegative");
    const double mix_sum = config.w_unigram + config.w_left + config.w_right;
    if (std::abs(mix_sum - 1.0) > 1e-9) throw InvalidArgument("train: mix weights must sum to 1");

    const int V = vocab.size();
    int max_len = 0;
    for (const auto& e : corpus.programs) max_len = std::max(max_len, static_cast<int>(e.tokens.size()));

    NgramDenoiser model(vocab, config);
    model.trained_programs_ = static_cast<double>(corpus.size());
    model.pos_unigram_.setZero(max_len, V);
    model.global_unigram_.setZero(V);
    model.bigram_left_.assign(static_cast<std::size_t>(config.window), Eigen::MatrixXd::Zero(V, V));
    model.bigram_right_.assign(static_cast<std::size_t>(config.window), Eigen::MatrixXd::Zero(V, V));

    for (const auto& e : corpus.programs) {
        const int n = static_cast<int>(e.tokens.size());
        for (int i = 0; i < n; ++i) {
            const int v = e.tokens[i];
            if (v < 0 || v >= V) throw InvalidArgument("train: token id outside vocabulary");
            if (v == vocab.mask_id()) throw InvalidArgument("train: corpus contains mask tokens");
            model.pos_unigram_(i, v) += 1.0;
            model.global_unigram_(v) += 1.0;
            for (int d = 1; d <= config.window; ++d) {
                if (i - d >= 0) model.bigram_left_[static_cast<std::size_t>(d - 1)](e.tokens[i - d], v) += 1.0;
                if (i + d < n) model.bigram_right_[static_cast<std::size_t>(d - 1)](e.tokens[i + d], v) += 1.0;
            }
        }
    }
    return model;
}

namespace {

// Additively smoothed distribution over non-mask tokens.
Eigen::VectorXd smooth(const Eigen::VectorXd& counts, int mask_id, double smoothing) {
    Eigen::VectorXd p = counts.array() + smoothing;
    p[mask_id] = 0.0;
    const double z = p.sum();
    if (z <= 0.0) throw NumericalError("smooth: zero normalizer");
    return p / z;
}

}  // namespace

Eigen::VectorXd NgramDenoiser::left_conditional(int u) const {
    return smooth(bigram_left_[0].row(u).transpose(), vocab_.mask_id(), config_.smoothing);
}

Eigen::VectorXd NgramDenoiser::masked_row(const std::vector<int>& tokens, int pos,
                                          const std::vector<Eigen::MatrixXd>& left,
                                          const std::vector<Eigen::MatrixXd>& right,
                                          const Eigen::VectorXd& hint_uni) const {
    const int mask = vocab_.mask_id();
    const int L = static_cast<int>(tokens.size());

    int left_tok = -1, left_dist = 0;
    for (int d = 1; d <= config_.window && pos - d >= 0; ++d) {
        if (tokens[pos - d] != mask) {
            left_tok = tokens[pos - d];
            left_dist = d;
            break;
        }
    }
    int right_tok = -1, right_dist = 0;
    for (int d = 1; d <= config_.window && pos + d < L; ++d) {
        if (tokens[pos + d] != mask) {
            right_tok = tokens[pos + d];
            right_dist = d;
            break;
        }
    }

    Eigen::VectorXd uni_counts = pos < pos_unigram_.rows()
                                     ? Eigen::VectorXd(pos_unigram_.row(pos).transpose())
                                     : global_unigram_;
    if (hint_uni.size() == uni_counts.size()) uni_counts += hint_uni;
    const Eigen::VectorXd uni = smooth(uni_counts, mask, config_.smoothing);

    double wu = config_.w_unigram;
    Eigen::VectorXd row = Eigen::VectorXd::Zero(vocab_.size());
    if (left_tok >= 0) {
        const auto& table = left[static_cast<std::size_t>(left_dist - 1)];
        row += config_.w_left * smooth(table.row(left_tok).transpose(), mask, config_.smoothing);
    } else {
        wu += config_.w_left;  // no committed neighbor in window: fold into unigram
    }
    if (right_tok >= 0) {
        const auto& table = right[static_cast<std::size_t>(right_dist - 1)];
        row += config_.w_right * smooth(table.row(right_tok).transpose(), mask, config_.smoothing);
    } else {
        wu += config_.w_right;
    }
    row += wu * uni;
    return row / row.sum();
}

CleanProposal NgramDenoiser::predict(const TokenState& state, int /*t*/) const {
    const int L = state.length();
    const int V = vocab_.size();
    const int mask = vocab_.mask_id();

    // Feedback conditioning: a message in the context buffer contributes
    // pseudo-counts to the bigram tables and the unigram component, nudging
    // masked rows toward the hinted pattern.
    const std::vector<Eigen::MatrixXd>* left = &bigram_left_;
    const std::vector<Eigen::MatrixXd>* right = &bigram_right_;
    std::vector<Eigen::MatrixXd> left_h, right_h;
    Eigen::VectorXd hint_uni;
    if (config_.hint_weight > 0.0 && state.context && state.context->buffer_len > 0) {
        std::vector<int> message;
        const auto& ctx = *state.context;
        for (int i = 0; i < ctx.buffer_len; ++i) {
            const int tok = ctx.tokens[static_cast<std::size_t>(ctx.buffer_start + i)];
            if (tok != mask) message.push_back(tok);
        }
        if (!message.empty()) {
            left_h = bigram_left_;
            right_h = bigram_right_;
            hint_uni = Eigen::VectorXd::Zero(V);
            const double w = config_.hint_weight * std::max(trained_programs_, 1.0);
            const int n = static_cast<int>(message.size());
            for (int i = 0; i < n; ++i) {
                hint_uni[message[static_cast<std::size_t>(i)]] += w;
                for (int d = 1; d <= config_.window; ++d) {
                    if (i - d >= 0)
                        left_h[static_cast<std::size_t>(d - 1)](
                            message[static_cast<std::size_t>(i - d)],
                            message[static_cast<std::size_t>(i)]) += w;
                    if (i + d < n)
                        right_h[static_cast<std::size_t>(d - 1)](
                            message[static_cast<std::size_t>(i + d)],
                            message[static_cast<std::size_t>(i)]) += w;
                }
            }
            left = &left_h;
            right = &right_h;
        }
    }

    CleanProposal p;
    p.probs.setZero(L, V);
    for (int i = 0; i < L; ++i) {
        if (state.tokens[i] != mask) {
            p.probs(i, state.tokens[i]) = 1.0;
        } else {
            p.probs.row(i) = masked_row(state.tokens, i, *left, *right, hint_uni).transpose();
        }
    }
    return p;
}

double NgramDenoiser::perplexity(const Corpus& corpus) const {
    const int mask = vocab_.mask_id();
    double log_sum = 0.0;
    std::size_t n = 0;
    for (const auto& e : corpus.programs) {
        TokenState st;
        st.tokens = e.tokens;
        for (int i = 0; i < static_cast<int>(e.tokens.size()); ++i) {
            const int held_out = st.tokens[i];
            st.tokens[i] = mask;
            const Eigen::VectorXd row =
                masked_row(st.tokens, i, bigram_left_, bigram_right_, Eigen::VectorXd());
            st.tokens[i] = held_out;
            log_sum += std::log(std::max(row[held_out], 1e-300));
            ++n;
        }
    }
    if (n == 0) throw InvalidArgument("perplexity: empty corpus");
    return std::exp(-log_sum / static_cast<double>(n));
}

nlohmann::json NgramDenoiser::to_json() const {
    nlohmann::json left = nlohmann::json::array();
    nlohmann::json right = nlohmann::json::array();
    for (const auto& m : bigram_left_) left.push_back(matrix_to_json(m));
    for (const auto& m : bigram_right_) right.push_back(matrix_to_json(m));
    return {{"version", kModelVersion},
            {"vocab", vocab_.to_json()},
            {"config", config_.to_json()},
            {"trained_programs", trained_programs_},
            {"pos_unigram", matrix_to_json(pos_unigram_)},
            {"global_unigram", std::vector<double>(global_unigram_.data(), global_unigram_.data() + global_unigram_.size())},
            {"bigram_left", left},
            {"bigram_right", right}};
}

NgramDenoiser NgramDenoiser::from_json(const nlohmann::json& j) {
    if (j.at("version").get<int>() != kModelVersion)
        throw InvalidArgument("denoiser file version mismatch");
    NgramDenoiser model(Vocabulary::from_json(j.at("vocab")), NgramConfig::from_json(j.at("config")));
    model.trained_programs_ = j.value("trained_programs", 0.0);
    model.pos_unigram_ = matrix_from_json(j.at("pos_unigram"));
    const auto g = j.at("global_unigram").get<std::vector<double>>();
    model.global_unigram_ = Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<int>(g.size()));
    for (const auto& m : j.at("bigram_left")) model.bigram_left_.push_back(matrix_from_json(m));
    for (const auto& m : j.at("bigram_right")) model.bigram_right_.push_back(matrix_from_json(m));
    if (static_cast<int>(model.bigram_left_.size()) != model.config_.window)
        throw InvalidArgument("denoiser file bigram tables do not match the window");
    return model;
}

void NgramDenoiser::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot open for write: " + path);
    out << to_json().dump();
}

NgramDenoiser NgramDenoiser::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open denoiser file: " + path);
    nlohmann::json j;
    in >> j;
    return from_json(j);
}

}  // namespace cdc
