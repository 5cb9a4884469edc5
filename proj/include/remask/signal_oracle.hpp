#pragma once

#include "remask/oracle.hpp"

#include <cstdint>
#include <vector>

namespace remask {

// Synthetic oracle embodying the aligned > null >> adversarial ordering.
//
// For position i of the active block the true token gets
//   p = logistic(alpha0 + bias[i] + alpha1 * n_aligned(i) - alpha2 * n_adv(i))
// where the counts run over the other committed positions of the block that
// do / do not match the reference. The rest of the mass goes to distractor[i].
// The functional form is an artifact choice; only the ordering is intended.
struct SignalModelParams {
    std::vector<Token> reference;   // true token per absolute position
    std::vector<Token> distractor;  // distractor[i] != reference[i]
    double             alpha0 = 0.0;
    double             alpha1 = 1.0;
    double             alpha2 = 2.0;
    double             bias_spread = 0.0;  // per-position bias ~ U(-spread, spread), drawn from the seed
    TokenId            vocab_size = 0;
};

class SignalOracle final : public Oracle {
public:
    // Throws ValidationError when a distractor equals its reference token or
    // a token lies outside the vocabulary.
    SignalOracle(SignalModelParams params, std::uint64_t seed);

    Vocabulary vocabulary() const override;
    BlockPosterior score_block(std::span<const Token> visible,
                               BlockRange             block,
                               const CurrentTokens &  current) const override;

    // p(true token at pos) under the given visible block state.
    double p_true(std::span<const Token> visible, BlockRange block, std::size_t pos) const;

    const SignalModelParams & params() const noexcept { return params_; }
    const std::vector<double> & bias() const noexcept { return bias_; }

private:
    SignalModelParams   params_;
    std::vector<double> bias_;
};

SignalOracle make_signal_oracle(SignalModelParams params, std::uint64_t seed);

double logistic(double x) noexcept;

} // namespace remask
