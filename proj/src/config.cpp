#include "remask/config.hpp"

#include "remask/errors.hpp"

#include <array>
#include <utility>

namespace remask {

namespace {

void require_probability(double v, const char * name) {
    if (!(v >= 0.0 && v <= 1.0)) {
        throw ValidationError(std::string(name) + " must lie in [0, 1]");
    }
}

constexpr std::array<std::pair<StrategyKind, std::string_view>, 6> kStrategyNames{{
    { StrategyKind::none,           "none"           },
    { StrategyKind::t2t_replace,    "t2t_replace"    },
    { StrategyKind::t2m_lowprob,    "t2m_lowprob"    },
    { StrategyKind::t2m_t2ttrigger, "t2m_t2ttrigger" },
    { StrategyKind::t2m_logitdiff,  "t2m_logitdiff"  },
    { StrategyKind::random_remask,  "random_remask"  },
}};

} // namespace

void StrategyConfig::validate() const {
    require_probability(tau_m2t, "tau_m2t");
    require_probability(tau_t2t, "tau_t2t");
    require_probability(tau_lp, "tau_lp");
    require_probability(tau_tr, "tau_tr");
    require_probability(tau_ld, "tau_ld");
    require_probability(sigma, "sigma");
    if (c_max < 0) {
        throw ValidationError("c_max must be non-negative");
    }
    if (!(rho_max > 0.0 && rho_max <= 1.0)) {
        throw ValidationError("rho_max must lie in (0, 1]");
    }
    if (n_transfer < 1) {
        throw ValidationError("n_transfer must be at least 1");
    }
    if (block_len < 1) {
        throw ValidationError("block_len must be positive");
    }
    if (max_new_tokens < 1) {
        throw ValidationError("max_new_tokens must be positive");
    }
    if (max_inner_iters < 0) {
        throw ValidationError("max_inner_iters must be positive (or 0 for 4 * block_len)");
    }
}

std::string_view to_string(StrategyKind kind) noexcept {
    for (const auto & [k, name] : kStrategyNames) {
        if (k == kind) {
            return name;
        }
    }
    return "unknown";
}

std::optional<StrategyKind> parse_strategy(std::string_view name) noexcept {
    for (const auto & [k, n] : kStrategyNames) {
        if (n == name) {
            return k;
        }
    }
    return std::nullopt;
}

bool is_remask(StrategyKind kind) noexcept {
    switch (kind) {
        case StrategyKind::t2m_lowprob:
        case StrategyKind::t2m_t2ttrigger:
        case StrategyKind::t2m_logitdiff:
        case StrategyKind::random_remask:
            return true;
        default:
            return false;
    }
}

double EditingStrategy::threshold(const StrategyConfig & config) const noexcept {
    switch (kind) {
        case StrategyKind::t2t_replace:    return config.tau_t2t;
        case StrategyKind::t2m_lowprob:    return config.tau_lp;
        case StrategyKind::t2m_t2ttrigger: return config.tau_tr;
        case StrategyKind::t2m_logitdiff:  return config.tau_ld;
        case StrategyKind::random_remask:  return config.sigma;
        case StrategyKind::none:           return 0.0;
    }
    return 0.0;
}

void EditingStrategy::validate(const StrategyConfig & config) const {
    config.validate();
    if (kind == StrategyKind::random_remask && !(config.sigma > 0.0)) {
        throw ValidationError("random_remask requires sigma in (0, 1]");
    }
    if (is_remask(kind) && config.c_max < 1) {
        throw ValidationError("remask strategies require c_max >= 1");
    }
}

} // namespace remask
