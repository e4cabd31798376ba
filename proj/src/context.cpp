#include "cdc/context.hpp"

#include "cdc/errors.hpp"

namespace cdc {

ContextPtr make_context(std::vector<int> prompt, int buffer_len, int mask_id, int family) {
    if (buffer_len < 0) throw InvalidArgument("buffer_len must be >= 0");
    auto ctx = std::make_shared<Context>();
    ctx->buffer_start = static_cast<int>(prompt.size());
    ctx->buffer_len = buffer_len;
    ctx->family = family;
    ctx->tokens = std::move(prompt);
    ctx->tokens.insert(ctx->tokens.end(), static_cast<std::size_t>(buffer_len), mask_id);
    return ctx;
}

ContextPtr empty_context() {
    static const ContextPtr ctx = std::make_shared<Context>();
    return ctx;
}

}  // namespace cdc
