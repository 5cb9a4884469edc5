#pragma once

#include "remask/config.hpp"
#include "remask/oracle.hpp"
#include "remask/rng.hpp"
#include "remask/state.hpp"
#include "remask/trajectory.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace remask {

enum class Detector { lowprob, t2t_trigger, logitdiff, random };

std::string_view to_string(Detector d) noexcept;

// Detector for a remask strategy kind. Throws ContractViolation for
// t2t_replace and none.
Detector detector_for(StrategyKind kind);

// A position a detector wants remasked. Lower score = less confident = kept
// first when the ratio cap binds.
struct Flag {
    std::size_t pos   = 0;
    double      score = 0.0;
    friend bool operator==(const Flag &, const Flag &) = default;
};

// --- fill -------------------------------------------------------------------

// Masked positions whose top-1 probability exceeds tau_m2t, filled with their
// argmax. When none qualifies, the n_transfer most confident masked positions
// are filled instead (ties to the lower position). Throws ContractViolation
// when the block has no mask or the posterior misses a masked position.
std::vector<EditDecision> m2t_step(const GenerationState & state, const BlockPosterior & posterior,
                                   const StrategyConfig & config);

// --- T2T replacement ----------------------------------------------------------

// Editable positions whose argmax differs from the committed token with
// probability above tau_t2t; all decided against the same posterior.
std::vector<EditDecision> t2t_edit_step(const GenerationState & state, const BlockPosterior & posterior,
                                        const StrategyConfig & config);

// --- detectors ----------------------------------------------------------------

// current_p < tau_lp; score = current_p.
std::vector<Flag> detect_lowprob(const GenerationState & state, const BlockPosterior & posterior, double tau_lp);

// top-1 differs from the committed token with p > tau_tr; score = 1 - top-1 p.
std::vector<Flag> detect_t2t_trigger(const GenerationState & state, const BlockPosterior & posterior, double tau_tr);

// prev_prob - current_p > tau_ld where prev_prob exists; abstains otherwise.
// score = current_p.
std::vector<Flag> detect_logitdiff(const GenerationState & state, const BlockPosterior & posterior, double tau_ld);

// Each editable position independently with probability sigma; score = the
// uniform draw.
std::vector<Flag> detect_random(const GenerationState & state, double sigma, Rng & rng);

// Drops positions at their remask budget, then keeps the floor(rho_max * |E|)
// lowest scores (ties to the lower position). Result ordered by position.
std::vector<Flag> apply_caps(std::vector<Flag> flagged, std::span<const int> remask_counts, int c_max,
                             double rho_max, std::size_t editable_count);

// --- remask -------------------------------------------------------------------

// Runs `detector`, caps the result and resets the survivors to the mask,
// bumping their counters and dropping their prev_prob. Returns the remask
// decisions; empty means the editing phase converged.
std::vector<EditDecision> t2m_step(GenerationState & state, const BlockPosterior & posterior, Detector detector,
                                   const StrategyConfig & config, Rng & rng);

// Writes decisions into the state (fills, edits or remasks).
void apply_decisions(GenerationState & state, std::span<const EditDecision> decisions);

// --- loop ---------------------------------------------------------------------

struct BlockSummary {
    std::size_t block_index = 0;
    int         inner_iters = 0;
    int         fills       = 0;
    int         edits       = 0;
    int         remasks     = 0;
    int         frozen      = 0;  // positions frozen by the edit oscillation guard
    bool        converged   = false;
};

struct RunStats {
    int  remasks     = 0;
    int  edits       = 0;
    int  fills       = 0;
    int  inner_iters = 0;
    int  blocks      = 0;
    bool converged   = true;

    std::vector<BlockSummary> per_block;
    std::vector<std::string>  warnings;
};

// Alternates fill and editing against one posterior per inner iteration until
// the block has no mask and the editing phase makes no decision, or
// inner_iter_limit() is hit (reported as non-converged). Events are appended
// to `trajectory` as they happen.
BlockSummary run_block(GenerationState & state, const Oracle & oracle, const EditingStrategy & strategy,
                       const StrategyConfig & config, Trajectory & trajectory, Rng & rng,
                       std::vector<std::string> * warnings = nullptr);

struct GenerationResult {
    std::vector<Token> tokens;  // full sequence, prompt included
    std::vector<Token> answer;  // generated tokens up to (excluding) EOS
    Trajectory         trajectory;
    RunStats           stats;
};

// Runs blocks left to right until EOS survives a block or max_new_tokens is
// reached. Deterministic given (oracle, strategy, config). Oracle errors
// propagate; the events recorded so far remain in `trajectory`.
GenerationResult generate(std::span<const Token> prompt, const Oracle & oracle, const EditingStrategy & strategy,
                          const StrategyConfig & config);
GenerationResult generate(std::span<const Token> prompt, const Oracle & oracle, const EditingStrategy & strategy,
                          const StrategyConfig & config, Trajectory & trajectory);

// {answer_tokens, remasks, edits, fills, inner_iters, converged, blocks}
std::string summary_json(const GenerationResult & result);

} // namespace remask
