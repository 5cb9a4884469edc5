#include "remask/state.hpp"

#include "remask/errors.hpp"

#include <algorithm>

namespace remask {

namespace {

BlockRange block_at(std::size_t index, std::size_t block_len, std::size_t total) {
    const std::size_t start = index * block_len;
    return { start, std::min(start + block_len, total) };
}

void reset_block_bookkeeping(GenerationState & state) {
    for (std::size_t i = state.block.start; i < state.block.end; ++i) {
        state.remask_counts[i] = 0;
        state.edit_counts[i]   = 0;
        state.prev_prob[i].reset();
    }
    state.step = 0;
}

} // namespace

bool GenerationState::block_has_mask() const noexcept {
    for (std::size_t i = block.start; i < block.end; ++i) {
        if (tokens[i].is_mask()) {
            return true;
        }
    }
    return false;
}

GenerationState new_generation_state(std::span<const Token> prompt, const StrategyConfig & config) {
    config.validate();
    if (prompt.empty()) {
        throw ValidationError("prompt must not be empty");
    }
    if (std::any_of(prompt.begin(), prompt.end(), [](Token t) { return t.is_mask(); })) {
        throw ValidationError("prompt must not contain the mask token");
    }

    GenerationState state;
    state.prompt_len = prompt.size();
    state.block_len  = static_cast<std::size_t>(config.block_len);

    const std::size_t total = prompt.size() + static_cast<std::size_t>(config.max_new_tokens);
    state.tokens.assign(prompt.begin(), prompt.end());
    state.tokens.resize(total, kMask);
    state.remask_counts.assign(total, 0);
    state.edit_counts.assign(total, 0);
    state.prev_prob.assign(total, std::nullopt);

    state.block_index = state.prompt_len / state.block_len;
    state.block       = block_at(state.block_index, state.block_len, total);
    return state;
}

std::vector<std::size_t> editable_positions(const GenerationState & state) {
    std::vector<std::size_t> out;
    for (std::size_t i = std::max(state.block.start, state.prompt_len); i < state.block.end; ++i) {
        if (!state.tokens[i].is_mask()) {
            out.push_back(i);
        }
    }
    return out;
}

CurrentTokens current_tokens(const GenerationState & state) {
    CurrentTokens out;
    for (std::size_t pos : editable_positions(state)) {
        out.emplace(pos, state.tokens[pos]);
    }
    return out;
}

bool advance_block(GenerationState & state) {
    reset_block_bookkeeping(state);
    if (state.block.end >= state.size()) {
        state.finished = true;
        return false;
    }
    ++state.block_index;
    state.block = block_at(state.block_index, state.block_len, state.size());
    reset_block_bookkeeping(state);
    return true;
}

} // namespace remask
