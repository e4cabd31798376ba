#include "cdc/mini/lexer.hpp"

#include <cctype>

namespace cdc::mini {

std::vector<int> lex(const std::string& text, const Vocabulary& vocab) {
    std::vector<int> out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (std::isspace(static_cast<unsigned char>(text[i]))) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        const std::string lexeme = text.substr(i, j - i);
        auto id = vocab.id_of(lexeme);
        if (!id) throw LexError(static_cast<int>(i), lexeme);
        out.push_back(*id);
        i = j;
    }
    return out;
}

std::string detok(const std::vector<int>& tokens, const Vocabulary& vocab) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += vocab.token(tokens[i]);
    }
    return out;
}

}  // namespace cdc::mini
