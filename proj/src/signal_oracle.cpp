#include "remask/signal_oracle.hpp"

#include "remask/errors.hpp"
#include "remask/rng.hpp"

#include <cmath>

namespace remask {

double logistic(double x) noexcept {
    return 1.0 / (1.0 + std::exp(-x));
}

SignalOracle::SignalOracle(SignalModelParams params, std::uint64_t seed) : params_(std::move(params)) {
    if (params_.reference.size() != params_.distractor.size()) {
        throw ValidationError("reference and distractor must have equal length");
    }
    if (params_.vocab_size < 2) {
        throw ValidationError("signal oracle needs a vocabulary of at least two tokens");
    }
    for (std::size_t i = 0; i < params_.reference.size(); ++i) {
        const Token r = params_.reference[i];
        const Token d = params_.distractor[i];
        if (r.is_mask() || d.is_mask() || r.id >= params_.vocab_size || d.id >= params_.vocab_size) {
            throw ValidationError("signal oracle tokens must lie inside the vocabulary");
        }
        if (r == d) {
            throw ValidationError("distractor equals reference at position " + std::to_string(i));
        }
    }
    if (params_.bias_spread < 0.0) {
        throw ValidationError("bias_spread must be non-negative");
    }
    bias_.assign(params_.reference.size(), 0.0);
    if (params_.bias_spread > 0.0) {
        Rng rng(seed);
        for (auto & b : bias_) {
            b = params_.bias_spread * (2.0 * rng.uniform() - 1.0);
        }
    }
}

Vocabulary SignalOracle::vocabulary() const {
    return { params_.vocab_size, std::nullopt, std::nullopt };
}

double SignalOracle::p_true(std::span<const Token> visible, BlockRange block, std::size_t pos) const {
    int aligned     = 0;
    int adversarial = 0;
    for (std::size_t j = block.start; j < block.end; ++j) {
        if (j == pos || visible[j].is_mask()) {
            continue;
        }
        if (visible[j] == params_.reference[j]) {
            ++aligned;
        } else {
            ++adversarial;
        }
    }
    return logistic(params_.alpha0 + bias_[pos] + params_.alpha1 * aligned - params_.alpha2 * adversarial);
}

BlockPosterior SignalOracle::score_block(std::span<const Token> visible,
                                         BlockRange             block,
                                         const CurrentTokens &  current) const {
    if (visible.size() != block.end || block.end > params_.reference.size()) {
        throw ContractViolation("visible prefix must end at the block boundary");
    }
    BlockPosterior out;
    out.block = block;
    out.k     = 2;
    out.positions.resize(block.size());
    for (std::size_t pos = block.start; pos < block.end; ++pos) {
        const double p  = p_true(visible, block, pos);
        auto &       ps = out.positions[pos - block.start];
        ps.top          = { { params_.reference[pos], p }, { params_.distractor[pos], 1.0 - p } };
        sort_candidates(ps.top);
        if (auto it = current.find(pos); it != current.end()) {
            if (it->second == params_.reference[pos]) {
                ps.current_p = p;
            } else if (it->second == params_.distractor[pos]) {
                ps.current_p = 1.0 - p;
            } else {
                ps.current_p = 0.0;
            }
        }
    }
    return out;
}

SignalOracle make_signal_oracle(SignalModelParams params, std::uint64_t seed) {
    return SignalOracle(std::move(params), seed);
}

} // namespace remask
