#pragma once

#include <string>
#include <vector>

#include "cdc/errors.hpp"
#include "cdc/vocab.hpp"

namespace cdc::mini {

struct LexError : InvalidArgument {
    int position;  // character offset of the offending lexeme
    LexError(int pos, const std::string& lexeme)
        : InvalidArgument("unknown lexeme '" + lexeme + "' at offset " + std::to_string(pos)),
          position(pos) {}
};

/// Whitespace tokenizer; every lexeme must be a vocabulary token.
std::vector<int> lex(const std::string& text, const Vocabulary& vocab);

/// Inverse of lex up to whitespace normalization: tokens joined by single spaces.
std::string detok(const std::vector<int>& tokens, const Vocabulary& vocab);

}  // namespace cdc::mini
