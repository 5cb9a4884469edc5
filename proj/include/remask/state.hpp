#pragma once

#include "remask/config.hpp"
#include "remask/types.hpp"

#include <optional>
#include <span>
#include <vector>

namespace remask {

// The evolving sequence of one generation run.
//
// Blocks are laid on an absolute grid of block_len positions starting at 0, so
// the first response block may overlap the tail of the prompt. Prompt
// positions are frozen. Per-position bookkeeping vectors span the whole
// sequence and are reset for the block range whenever the cursor advances.
struct GenerationState {
    std::vector<Token> tokens;
    std::size_t        prompt_len  = 0;
    std::size_t        block_len   = 0;
    BlockRange         block;
    std::size_t        block_index = 0;

    std::vector<int>                   remask_counts;
    std::vector<int>                   edit_counts;
    std::vector<std::optional<double>> prev_prob;

    int  step     = 0;  // inner iteration within the active block
    bool finished = false;

    std::size_t size() const noexcept { return tokens.size(); }
    bool is_prompt(std::size_t pos) const noexcept { return pos < prompt_len; }
    bool block_has_mask() const noexcept;

    // Tokens up to block_end, the only part an oracle may see.
    std::span<const Token> visible() const noexcept { return std::span(tokens).first(block.end); }
};

// Prompt followed by max_new_tokens mask slots, cursor on the block containing
// the first response position. Throws ValidationError on an empty prompt or a
// prompt containing the mask.
GenerationState new_generation_state(std::span<const Token> prompt, const StrategyConfig & config);

// Committed, non-prompt positions inside the active block, ascending.
std::vector<std::size_t> editable_positions(const GenerationState & state);

// Committed editable tokens of the active block, the oracle's `current` map.
CurrentTokens current_tokens(const GenerationState & state);

// Moves the cursor to the next block and clears per-block bookkeeping.
// Returns false (and marks the state finished) when the sequence is exhausted.
bool advance_block(GenerationState & state);

} // namespace remask
