#pragma once

#include "remask/analysis.hpp"
#include "remask/config.hpp"
#include "remask/engine.hpp"
#include "remask/signal_oracle.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace remask {

// --- grid --------------------------------------------------------------------

// One point of the ablation grid. The baseline carries no cap values.
struct SweepPoint {
    EditingStrategy       strategy;
    double                tau = 0.0;
    std::optional<int>    c_max;
    std::optional<double> rho_max;

    bool is_baseline() const noexcept { return !c_max.has_value(); }

    // Writes tau and the caps into the fields this strategy reads.
    StrategyConfig apply(StrategyConfig base) const;
};

struct SweepGrid {
    std::vector<double> lowprob_taus   = { 0.1, 0.3, 0.5, 0.7, 0.9 };
    std::vector<double> trigger_taus   = { 0.5, 0.7, 0.9 };
    std::vector<double> logitdiff_taus = { 0.1, 0.2, 0.3, 0.5 };
    std::vector<int>    c_maxes        = { 1, 3, 5 };
    std::vector<double> rho_maxes      = { 0.25, 0.5, 1.0 };
    double              baseline_tau   = 0.5;  // tau_t2t of the baseline row

    // Baseline first, then strategy x tau x c_max x rho_max.
    std::vector<SweepPoint> points() const;
};

// --- tasks -------------------------------------------------------------------

struct TaskInstance {
    std::vector<Token> prompt;
    std::vector<Token> reference;  // expected answer tokens

    std::optional<SignalModelParams>     signal;  // signal-model task
    std::uint64_t                        oracle_seed = 0;
    std::optional<std::filesystem::path> scenario;  // scripted task

    std::unique_ptr<Oracle> make_oracle() const;
};

struct TaskSet {
    StrategyConfig            base;  // block_len, max_new_tokens, tau_m2t, ...
    std::vector<TaskInstance> instances;

    // Throws ValidationError when empty or a reference outgrows max_new_tokens.
    void validate() const;
};

// Defaults: strong aligned signal, adversarial penalty 4x the aligned gain.
struct SignalTaskParams {
    std::size_t prompt_len  = 4;
    TokenId     vocab_size  = 32;
    double      alpha0      = 1.0;
    double      alpha1      = 2.0;
    double      alpha2      = 8.0;
    double      bias_spread = 2.0;
    int         block_len   = 16;
};

// Deterministic in `seed`. Each instance draws its own reference, distractors
// and oracle seed; max_new_tokens is set to `length`.
TaskSet gen_signal_task(std::size_t n_instances, std::size_t length, const SignalTaskParams & params,
                        std::uint64_t seed);

nlohmann::json to_json(const TaskSet & tasks);
TaskSet        task_set_from_json(const nlohmann::json & j);
TaskSet        load_task_set(const std::filesystem::path & path);

// --- sweep -------------------------------------------------------------------

struct SweepRow {
    SweepPoint  point;
    bool        failed = false;
    std::string error;
    double      accuracy        = 0;  // exact-match fraction
    double      avg_remasks     = 0;
    double      avg_edits       = 0;
    double      avg_inner_iters = 0;

    std::vector<Outcome>    outcomes;      // per instance, in task order
    std::vector<Trajectory> trajectories;  // only with keep_trajectories
};

struct SweepOptions {
    int  threads           = 0;  // 0: OpenMP default
    bool keep_trajectories = false;
};

// Evaluates one grid point over every instance.
SweepRow evaluate_point(const SweepPoint & point, const TaskSet & tasks,
                        const std::vector<std::unique_ptr<Oracle>> & oracles, bool keep_trajectories);

// Reference implementation: one point after another.
std::vector<SweepRow> run_sweep_serial(const std::vector<SweepPoint> & points, const TaskSet & tasks,
                                       const SweepOptions & options = {});

// Grid points spread over OpenMP threads; rows come back in grid order and
// match run_sweep_serial exactly.
std::vector<SweepRow> run_sweep_parallel(const std::vector<SweepPoint> & points, const TaskSet & tasks,
                                         const SweepOptions & options = {});

// strategy,tau,c_max,rho_max,accuracy,avg_remasks,avg_edits,avg_inner_iters
void        write_csv(std::ostream & out, const std::vector<SweepRow> & rows);
std::string to_csv(const std::vector<SweepRow> & rows);

// --- scenario runner ---------------------------------------------------------

struct ScenarioReport {
    GenerationResult         result;
    std::string              strategy;
    std::vector<Token>       span;  // response tokens inside the expectation span
    std::optional<bool>      expectation_met;  // unset when none is declared
    std::string              message;
};

// Runs the scenario's declared prompt under `strategy`; `overrides` (a JSON
// object of StrategyConfig fields) is applied on top of the scenario config.
// Throws ValidationError when the scenario declares no run.
ScenarioReport run_scenario(const std::filesystem::path & path, StrategyKind strategy,
                            const nlohmann::json & overrides = nlohmann::json::object());

// Same, against an arbitrary oracle (e.g. the remote client) using the
// scenario file only for prompt, config and expectation.
ScenarioReport run_scenario(const std::filesystem::path & path, StrategyKind strategy, const Oracle & oracle,
                            const nlohmann::json & overrides = nlohmann::json::object());

} // namespace remask
