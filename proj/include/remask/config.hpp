#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace remask {

// Thresholds, caps and limits shared by every strategy.
//
// Defaults follow the reference setup: tau_m2t = 0.7, tau_t2t = 0.5, B = 32,
// LowProb at 0.3 with C_max = 1 and rho_max = 0.25.
struct StrategyConfig {
    double tau_m2t = 0.7;   // M2T fill threshold
    double tau_t2t = 0.5;   // T2T replacement threshold
    double tau_lp  = 0.3;   // LowProb remask threshold
    double tau_tr  = 0.5;   // T2T-trigger remask threshold
    double tau_ld  = 0.2;   // LogitDiff drop threshold
    double sigma   = 0.1;   // random remask rate

    int    c_max   = 1;     // remasks per position per block
    double rho_max = 0.25;  // remask fraction of editable positions per step

    int n_transfer      = 1;    // forced-progress fill budget
    int block_len       = 32;
    int max_new_tokens  = 256;
    int max_inner_iters = 0;    // 0 means 4 * block_len

    std::uint64_t seed = 0;

    int inner_iter_limit() const noexcept { return max_inner_iters > 0 ? max_inner_iters : 4 * block_len; }

    // Edits allowed per position per block before it is frozen.
    int edit_limit() const noexcept { return 2 * c_max + 2; }

    // Throws ValidationError on out-of-range fields.
    void validate() const;
};

enum class StrategyKind {
    none,
    t2t_replace,
    t2m_lowprob,
    t2m_t2ttrigger,
    t2m_logitdiff,
    random_remask,
};

std::string_view            to_string(StrategyKind kind) noexcept;
std::optional<StrategyKind> parse_strategy(std::string_view name) noexcept;

bool is_remask(StrategyKind kind) noexcept;

struct EditingStrategy {
    StrategyKind kind = StrategyKind::t2t_replace;

    // The threshold this strategy is governed by (tau_t2t for replacement,
    // tau_lp / tau_tr / tau_ld for the detectors, sigma for random).
    double threshold(const StrategyConfig & config) const noexcept;

    // Strategy-specific invariants on top of StrategyConfig::validate().
    void validate(const StrategyConfig & config) const;
};

} // namespace remask
