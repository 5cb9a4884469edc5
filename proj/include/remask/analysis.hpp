#pragma once

#include "remask/trajectory.hpp"
#include "remask/types.hpp"

#include <json.hpp>

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace remask {

// --- stuck set ---------------------------------------------------------------

struct StuckParams {
    double epsilon = 0.01;
    double tau_t2t = 0.5;

    // 0 < epsilon < tau_t2t <= 1, else ValidationError.
    void validate() const;
};

// Committed positions whose token has probability < epsilon while no token
// reaches tau_t2t. Ascending.
std::vector<std::size_t> stuck_set(const BlockPosterior & posterior, const CurrentTokens & committed,
                                   const StuckParams & params);

struct StuckCheck {
    std::size_t pos           = 0;
    bool        t2t_fires     = false;
    bool        lowprob_fires = false;
};

struct StuckReport {
    std::vector<StuckCheck> positions;  // one entry per stuck position
    bool                    pass = true;
};

// Runs the engine's T2T edit step and LowProb detector on the stuck set and
// reports whether T2T stays silent while LowProb fires on every member.
// Throws ValidationError unless tau_lp > epsilon.
StuckReport verify_stuck(const BlockPosterior & posterior, const CurrentTokens & committed,
                                    const StuckParams & params, double tau_lp);

// --- context quality ---------------------------------------------------------

struct ContextQualityInput {
    double n_c     = 0;  // correct committed positions
    double n_e     = 0;  // erroneous committed positions
    double s_plus  = 1;  // > 0
    double s_minus = -1; // < 0
    double sigma   = 0;  // random remask rate

    void validate() const;
};

struct ContextQuality {
    double q_random   = 0;
    double q_targeted = 0;
    double advantage  = 0;
};

// Random vs. perfectly targeted remasking:
//   q_random   = (1 - sigma)(n_c s+ + n_e s-)
//   q_targeted = n_c s+
//   advantage  = sigma n_c s+ + (1 - sigma)(-n_e s-)
ContextQuality context_quality(const ContextQualityInput & in);

// Imperfect detector: `budget` positions are remasked, a fraction `precision`
// of them erroneous. Compared against a random pick of the same size, which
// hits errors at the base rate n_e / (n_c + n_e). sigma is ignored.
struct PrecisionPoint {
    double precision  = 0;
    bool   feasible   = true;  // the pick fits inside n_c and n_e
    double q_detector = 0;
    double q_random   = 0;
    double gain       = 0;  // q_detector - q_random
};

std::vector<PrecisionPoint> precision_sweep(const ContextQualityInput & in, double budget,
                                            const std::vector<double> & precisions);

// --- trajectory diff ---------------------------------------------------------

struct DiffCell {
    std::size_t block_index = 0;
    int         step        = 0;
    Phase       phase       = Phase::fill;
    Token       token;
    double      prob = 0;
};

struct PositionDiff {
    std::vector<DiffCell> a;
    std::vector<DiffCell> b;
    std::optional<Token>  final_a;
    std::optional<Token>  final_b;
};

struct DivergencePoint {
    std::size_t block_index = 0;
    int         step        = 0;
};

struct TrajectoryDiff {
    std::map<std::size_t, PositionDiff> positions;
    std::optional<DivergencePoint>      first_divergence;
    bool                                truncated     = false;
    std::size_t                         common_blocks = 0;

    bool identical() const noexcept { return !first_divergence && !truncated; }
};

// Throws ValidationError when the prompt lengths differ. Trajectories with
// different block counts are compared over their common block prefix and
// flagged as truncated.
TrajectoryDiff trajectory_diff(const Trajectory & a, const Trajectory & b);

nlohmann::ordered_json to_json(const TrajectoryDiff & diff);

// Side-by-side table, one row per position, cells "t<step>:<token>(<p>)".
std::string render_diff_table(const TrajectoryDiff & diff,
                              const std::function<std::string(Token)> & label = {});

// --- outcomes ----------------------------------------------------------------

struct Outcome {
    std::vector<Token> answer;
    std::vector<Token> reference;

    bool correct() const { return answer == reference; }
};

struct AccuracyReport {
    std::size_t total   = 0;
    std::size_t correct = 0;
    double      accuracy = 0;  // fraction in [0, 1]
};

struct PairedReport {
    std::size_t total           = 0;
    std::size_t repaired        = 0;  // wrong under base, right under other
    std::size_t broken          = 0;  // right under base, wrong under other
    std::size_t unchanged_right = 0;
    std::size_t unchanged_wrong = 0;
    double      net_points      = 0;  // (repaired - broken) / total * 100
};

AccuracyReport classify_outcomes(const std::vector<Outcome> & results);

// Throws ValidationError when the two lists differ in length or pair
// different references.
PairedReport classify_paired(const std::vector<Outcome> & base, const std::vector<Outcome> & other);

nlohmann::ordered_json to_json(const StuckReport & r);
nlohmann::ordered_json to_json(const ContextQuality & q);
nlohmann::ordered_json to_json(const std::vector<PrecisionPoint> & sweep);
nlohmann::ordered_json to_json(const PairedReport & r);

} // namespace remask
