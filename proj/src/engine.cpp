#include "remask/engine.hpp"

#include "remask/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace remask {

std::string_view to_string(Detector d) noexcept {
    switch (d) {
        case Detector::lowprob:     return "lowprob";
        case Detector::t2t_trigger: return "t2t_trigger";
        case Detector::logitdiff:   return "logitdiff";
        case Detector::random:      return "random";
    }
    return "unknown";
}

Detector detector_for(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::t2m_lowprob:    return Detector::lowprob;
        case StrategyKind::t2m_t2ttrigger: return Detector::t2t_trigger;
        case StrategyKind::t2m_logitdiff:  return Detector::logitdiff;
        case StrategyKind::random_remask:  return Detector::random;
        default:
            throw ContractViolation("strategy " + std::string(to_string(kind)) + " has no remask detector");
    }
}

namespace {

double current_p_at(const BlockPosterior & posterior, std::size_t pos) {
    const auto & ps = posterior.at(pos);
    if (!ps.current_p) {
        throw ContractViolation("posterior lacks current_p for committed position " + std::to_string(pos));
    }
    return *ps.current_p;
}

} // namespace

std::vector<EditDecision> m2t_step(const GenerationState & state, const BlockPosterior & posterior,
                                   const StrategyConfig & config) {
    struct Masked {
        std::size_t pos;
        Candidate   best;
    };
    std::vector<Masked> masked;
    for (std::size_t i = state.block.start; i < state.block.end; ++i) {
        if (!state.tokens[i].is_mask()) {
            continue;
        }
        if (!posterior.block.contains(i) || posterior.at(i).top.empty()) {
            throw ContractViolation("posterior misses masked position " + std::to_string(i));
        }
        masked.push_back({ i, posterior.at(i).top1() });
    }
    if (masked.empty()) {
        throw ContractViolation("m2t_step needs at least one masked position in the block");
    }

    std::vector<EditDecision> fills;
    for (const auto & m : masked) {
        if (m.best.p > config.tau_m2t) {
            fills.push_back({ state.step, Phase::fill, m.pos, kMask, m.best.token, m.best.p, std::nullopt,
                              state.block_index });
        }
    }
    if (!fills.empty()) {
        return fills;
    }

    // Forced progress.
    std::stable_sort(masked.begin(), masked.end(),
                     [](const Masked & a, const Masked & b) { return a.best.p > b.best.p; });
    const std::size_t n = std::min(masked.size(), static_cast<std::size_t>(config.n_transfer));
    masked.resize(n);
    std::sort(masked.begin(), masked.end(), [](const Masked & a, const Masked & b) { return a.pos < b.pos; });
    for (const auto & m : masked) {
        fills.push_back({ state.step, Phase::fill, m.pos, kMask, m.best.token, m.best.p, std::nullopt,
                          state.block_index });
    }
    return fills;
}

std::vector<EditDecision> t2t_edit_step(const GenerationState & state, const BlockPosterior & posterior,
                                        const StrategyConfig & config) {
    std::vector<EditDecision> edits;
    for (std::size_t pos : editable_positions(state)) {
        const auto & best = posterior.at(pos).top1();
        const Token  old  = state.tokens[pos];
        if (best.token != old && best.p > config.tau_t2t) {
            edits.push_back({ state.step, Phase::edit, pos, old, best.token, best.p, std::nullopt, state.block_index });
        }
    }
    return edits;
}

std::vector<Flag> detect_lowprob(const GenerationState & state, const BlockPosterior & posterior, double tau_lp) {
    std::vector<Flag> out;
    for (std::size_t pos : editable_positions(state)) {
        const double p = current_p_at(posterior, pos);
        if (p < tau_lp) {
            out.push_back({ pos, p });
        }
    }
    return out;
}

std::vector<Flag> detect_t2t_trigger(const GenerationState & state, const BlockPosterior & posterior, double tau_tr) {
    std::vector<Flag> out;
    for (std::size_t pos : editable_positions(state)) {
        const auto & best = posterior.at(pos).top1();
        if (best.token != state.tokens[pos] && best.p > tau_tr) {
            out.push_back({ pos, 1.0 - best.p });
        }
    }
    return out;
}

std::vector<Flag> detect_logitdiff(const GenerationState & state, const BlockPosterior & posterior, double tau_ld) {
    std::vector<Flag> out;
    for (std::size_t pos : editable_positions(state)) {
        const double now = current_p_at(posterior, pos);
        const auto & prev = state.prev_prob[pos];
        if (prev && *prev - now > tau_ld) {
            out.push_back({ pos, now });
        }
    }
    return out;
}

std::vector<Flag> detect_random(const GenerationState & state, double sigma, Rng & rng) {
    std::vector<Flag> out;
    for (std::size_t pos : editable_positions(state)) {
        const double u = rng.uniform();
        if (u < sigma) {
            out.push_back({ pos, u });
        }
    }
    return out;
}

std::vector<Flag> apply_caps(std::vector<Flag> flagged, std::span<const int> remask_counts, int c_max,
                             double rho_max, std::size_t editable_count) {
    std::erase_if(flagged, [&](const Flag & f) { return remask_counts[f.pos] >= c_max; });

    const auto k = static_cast<std::size_t>(std::floor(rho_max * static_cast<double>(editable_count)));
    if (flagged.size() > k) {
        std::sort(flagged.begin(), flagged.end(), [](const Flag & a, const Flag & b) {
            if (a.score != b.score) {
                return a.score < b.score;
            }
            return a.pos < b.pos;
        });
        flagged.resize(k);
    }
    std::sort(flagged.begin(), flagged.end(), [](const Flag & a, const Flag & b) { return a.pos < b.pos; });
    return flagged;
}

void apply_decisions(GenerationState & state, std::span<const EditDecision> decisions) {
    for (const auto & d : decisions) {
        if (state.is_prompt(d.pos)) {
            throw ContractViolation("decision targets prompt position " + std::to_string(d.pos));
        }
        if (state.tokens[d.pos] != d.old_token) {
            throw ContractViolation("stale decision at position " + std::to_string(d.pos));
        }
        state.tokens[d.pos] = d.new_token;
        state.prev_prob[d.pos].reset();
        switch (d.phase) {
            case Phase::remask: ++state.remask_counts[d.pos]; break;
            case Phase::edit:   ++state.edit_counts[d.pos]; break;
            case Phase::fill:   break;
        }
    }
}

std::vector<EditDecision> t2m_step(GenerationState & state, const BlockPosterior & posterior, Detector detector,
                                   const StrategyConfig & config, Rng & rng) {
    std::vector<Flag> flagged;
    switch (detector) {
        case Detector::lowprob:     flagged = detect_lowprob(state, posterior, config.tau_lp); break;
        case Detector::t2t_trigger: flagged = detect_t2t_trigger(state, posterior, config.tau_tr); break;
        case Detector::logitdiff:   flagged = detect_logitdiff(state, posterior, config.tau_ld); break;
        case Detector::random:      flagged = detect_random(state, config.sigma, rng); break;
    }
    const std::size_t editable = editable_positions(state).size();
    const auto        capped   = apply_caps(std::move(flagged), state.remask_counts, config.c_max, config.rho_max, editable);

    std::vector<EditDecision> remasks;
    remasks.reserve(capped.size());
    for (const auto & f : capped) {
        const auto & ps   = posterior.at(f.pos);
        const double prob = detector == Detector::t2t_trigger ? ps.top1().p : current_p_at(posterior, f.pos);
        remasks.push_back({ state.step, Phase::remask, f.pos, state.tokens[f.pos], kMask, prob,
                            std::string(to_string(detector)), state.block_index });
    }
    apply_decisions(state, remasks);
    return remasks;
}

BlockSummary run_block(GenerationState & state, const Oracle & oracle, const EditingStrategy & strategy,
                       const StrategyConfig & config, Trajectory & trajectory, Rng & rng,
                       std::vector<std::string> * warnings) {
    BlockSummary summary;
    summary.block_index = state.block_index;

    const Vocabulary vocab     = oracle.vocabulary();
    const int        limit     = config.inner_iter_limit();
    const int        edit_cap  = config.edit_limit();
    auto             warn      = [&](std::string msg) {
        if (warnings) {
            warnings->push_back(std::move(msg));
        }
    };

    while (true) {
        if (state.step >= limit) {
            warn("block " + std::to_string(state.block_index) + " did not converge within " + std::to_string(limit) +
                 " inner iterations");
            break;
        }

        const CurrentTokens current = current_tokens(state);
        const auto          visible = state.visible();
        if (visible.size() != state.block.end) {
            throw ContractViolation("engine would expose positions beyond the active block");
        }
        const BlockPosterior posterior = oracle.score_block(visible, state.block, current);
        validate_posterior(posterior, state.block, current, vocab);

        const bool had_mask = state.block_has_mask();
        const auto fills    = had_mask ? m2t_step(state, posterior, config) : std::vector<EditDecision>{};

        std::vector<EditDecision> editing;
        switch (strategy.kind) {
            case StrategyKind::none:
                break;
            case StrategyKind::t2t_replace: {
                editing = t2t_edit_step(state, posterior, config);
                std::erase_if(editing, [&](const EditDecision & e) {
                    if (state.edit_counts[e.pos] < edit_cap) {
                        return false;
                    }
                    if (state.edit_counts[e.pos] == edit_cap) {
                        // Logged once; the counter moves past the cap so later
                        // suppressions stay quiet.
                        ++state.edit_counts[e.pos];
                        ++summary.frozen;
                        warn("position " + std::to_string(e.pos) + " frozen after " + std::to_string(edit_cap) +
                             " edits in block " + std::to_string(state.block_index));
                    }
                    return true;
                });
                apply_decisions(state, editing);
                break;
            }
            default:
                editing = t2m_step(state, posterior, detector_for(strategy.kind), config, rng);
                break;
        }
        apply_decisions(state, fills);

        // prev_prob tracks the last score of tokens that stayed in place.
        for (const auto & [pos, tok] : current) {
            if (state.tokens[pos] == tok) {
                state.prev_prob[pos] = posterior.at(pos).current_p;
            } else {
                state.prev_prob[pos].reset();
            }
        }

        for (const auto & e : fills) {
            trajectory.events.push_back(e);
        }
        for (const auto & e : editing) {
            trajectory.events.push_back(e);
        }
        summary.fills += static_cast<int>(fills.size());
        if (strategy.kind == StrategyKind::t2t_replace) {
            summary.edits += static_cast<int>(editing.size());
        } else {
            summary.remasks += static_cast<int>(editing.size());
        }

        ++summary.inner_iters;
        ++state.step;

        if (!had_mask && editing.empty()) {
            summary.converged = true;
            break;
        }
    }
    return summary;
}

GenerationResult generate(std::span<const Token> prompt, const Oracle & oracle, const EditingStrategy & strategy,
                          const StrategyConfig & config, Trajectory & trajectory) {
    strategy.validate(config);
    const Vocabulary vocab = oracle.vocabulary();
    for (Token t : prompt) {
        if (!t.is_mask() && !vocab.contains(t)) {
            throw ValidationError("prompt token " + std::to_string(t.id) + " outside the oracle vocabulary");
        }
    }

    GenerationState  state = new_generation_state(prompt, config);
    GenerationResult result;
    Rng              rng(config.seed);
    trajectory.prompt_len = state.prompt_len;

    std::size_t generated_end = state.prompt_len;
    bool        saw_eos       = false;
    do {
        BlockSummary block = run_block(state, oracle, strategy, config, trajectory, rng, &result.stats.warnings);
        result.stats.fills += block.fills;
        result.stats.edits += block.edits;
        result.stats.remasks += block.remasks;
        result.stats.inner_iters += block.inner_iters;
        result.stats.converged = result.stats.converged && block.converged;
        ++result.stats.blocks;
        result.stats.per_block.push_back(block);
        generated_end = state.block.end;

        for (std::size_t i = std::max(state.block.start, state.prompt_len); i < state.block.end; ++i) {
            if (vocab.is_eos(state.tokens[i])) {
                saw_eos = true;
                break;
            }
        }
    } while (!saw_eos && advance_block(state));
    state.finished = true;

    result.tokens = state.tokens;
    for (std::size_t i = state.prompt_len; i < generated_end; ++i) {
        if (vocab.is_eos(state.tokens[i])) {
            break;
        }
        result.answer.push_back(state.tokens[i]);
    }
    result.trajectory = trajectory;
    return result;
}

GenerationResult generate(std::span<const Token> prompt, const Oracle & oracle, const EditingStrategy & strategy,
                          const StrategyConfig & config) {
    Trajectory trajectory;
    return generate(prompt, oracle, strategy, config, trajectory);
}

std::string summary_json(const GenerationResult & result) {
    nlohmann::ordered_json answer = nlohmann::ordered_json::array();
    for (Token t : result.answer) {
        answer.push_back(t.is_mask() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(t.id));
    }
    nlohmann::ordered_json j;
    j["answer_tokens"] = std::move(answer);
    j["remasks"]       = result.stats.remasks;
    j["edits"]         = result.stats.edits;
    j["fills"]         = result.stats.fills;
    j["inner_iters"]   = result.stats.inner_iters;
    j["converged"]     = result.stats.converged;
    j["blocks"]        = result.stats.blocks;
    return j.dump();
}

} // namespace remask
