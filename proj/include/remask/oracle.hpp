#pragma once

#include "remask/types.hpp"

#include <span>

namespace remask {

// The denoising model as the engine sees it: given the visible prefix and the
// active block, per-position top-k candidates plus the probability of each
// committed editable token.
//
// Implementations are immutable after construction and may be shared by
// concurrent generation runs.
class Oracle {
public:
    virtual ~Oracle() = default;

    virtual Vocabulary vocabulary() const = 0;

    // `visible` holds exactly block.end tokens; nothing past the block is ever
    // passed in. `current` lists the committed editable positions.
    virtual BlockPosterior score_block(std::span<const Token> visible,
                                       BlockRange             block,
                                       const CurrentTokens &  current) const = 0;
};

// Engine-side check on every oracle answer. Throws OracleError
// (malformed_response or vocab_mismatch).
void validate_posterior(const BlockPosterior & posterior,
                        BlockRange             block,
                        const CurrentTokens &  current,
                        const Vocabulary &     vocab);

// Orders candidates by probability descending, then by token id.
void sort_candidates(std::vector<Candidate> & candidates);

} // namespace remask
