#include "remask/sweep.hpp"

#include "remask/errors.hpp"
#include "remask/rng.hpp"
#include "remask/scenario.hpp"

#include <omp.h>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace remask {

using nlohmann::json;

StrategyConfig SweepPoint::apply(StrategyConfig c) const {
    switch (strategy.kind) {
    case StrategyKind::t2t_replace: c.tau_t2t = tau; break;
    case StrategyKind::t2m_lowprob: c.tau_lp = tau; break;
    case StrategyKind::t2m_t2ttrigger: c.tau_tr = tau; break;
    case StrategyKind::t2m_logitdiff: c.tau_ld = tau; break;
    case StrategyKind::random_remask: c.sigma = tau; break;
    case StrategyKind::none: break;
    }
    if (c_max) {
        c.c_max = *c_max;
    }
    if (rho_max) {
        c.rho_max = *rho_max;
    }
    return c;
}

std::vector<SweepPoint> SweepGrid::points() const {
    std::vector<SweepPoint> out;
    out.push_back({ { StrategyKind::t2t_replace }, baseline_tau, std::nullopt, std::nullopt });
    const std::pair<StrategyKind, const std::vector<double> *> families[] = {
        { StrategyKind::t2m_lowprob, &lowprob_taus },
        { StrategyKind::t2m_t2ttrigger, &trigger_taus },
        { StrategyKind::t2m_logitdiff, &logitdiff_taus },
    };
    for (const auto & [kind, taus] : families) {
        for (double tau : *taus) {
            for (int c : c_maxes) {
                for (double rho : rho_maxes) {
                    out.push_back({ { kind }, tau, c, rho });
                }
            }
        }
    }
    return out;
}

// --- tasks -------------------------------------------------------------------

std::unique_ptr<Oracle> TaskInstance::make_oracle() const {
    if (signal) {
        return std::make_unique<SignalOracle>(*signal, oracle_seed);
    }
    if (scenario) {
        return std::make_unique<TabularOracle>(load_scenario(*scenario));
    }
    throw ValidationError("task instance has neither signal parameters nor a scenario");
}

void TaskSet::validate() const {
    base.validate();
    if (instances.empty()) {
        throw ValidationError("task set is empty");
    }
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const auto & inst = instances[i];
        if (inst.prompt.empty()) {
            throw ValidationError("instance " + std::to_string(i) + " has an empty prompt");
        }
        if (inst.reference.size() > static_cast<std::size_t>(base.max_new_tokens)) {
            throw ValidationError("instance " + std::to_string(i) + " reference exceeds max_new_tokens");
        }
        if (inst.signal && inst.signal->reference.size() < inst.prompt.size() + static_cast<std::size_t>(base.max_new_tokens)) {
            throw ValidationError("instance " + std::to_string(i) + " signal reference shorter than the sequence");
        }
    }
}

TaskSet gen_signal_task(std::size_t n_instances, std::size_t length, const SignalTaskParams & params,
                        std::uint64_t seed) {
    if (params.vocab_size < 2) {
        throw ValidationError("signal task needs a vocabulary of at least two tokens");
    }
    if (params.prompt_len == 0 || length == 0) {
        throw ValidationError("prompt and answer lengths must be positive");
    }
    TaskSet tasks;
    tasks.base.block_len      = params.block_len;
    tasks.base.max_new_tokens = static_cast<int>(length);
    tasks.base.validate();

    Rng               rng(seed);
    const std::size_t total = params.prompt_len + length;
    const auto        vocab = static_cast<std::uint64_t>(params.vocab_size);
    for (std::size_t n = 0; n < n_instances; ++n) {
        SignalModelParams sp;
        sp.alpha0      = params.alpha0;
        sp.alpha1      = params.alpha1;
        sp.alpha2      = params.alpha2;
        sp.bias_spread = params.bias_spread;
        sp.vocab_size  = params.vocab_size;
        for (std::size_t i = 0; i < total; ++i) {
            const auto ref   = static_cast<TokenId>(rng.below(vocab));
            const auto shift = static_cast<TokenId>(1 + rng.below(vocab - 1));
            sp.reference.push_back(Token{ ref });
            sp.distractor.push_back(Token{ static_cast<TokenId>((ref + shift) % params.vocab_size) });
        }
        TaskInstance inst;
        inst.prompt.assign(sp.reference.begin(), sp.reference.begin() + static_cast<std::ptrdiff_t>(params.prompt_len));
        inst.reference.assign(sp.reference.begin() + static_cast<std::ptrdiff_t>(params.prompt_len), sp.reference.end());
        inst.oracle_seed = rng.next();
        inst.signal      = std::move(sp);
        tasks.instances.push_back(std::move(inst));
    }
    return tasks;
}

namespace {

json tokens_json(const std::vector<Token> & ts) {
    json out = json::array();
    for (Token t : ts) {
        out.push_back(t.id);
    }
    return out;
}

std::vector<Token> tokens_from(const json & j) {
    std::vector<Token> out;
    for (const auto & v : j) {
        out.push_back(Token{ v.get<TokenId>() });
    }
    return out;
}

json config_json(const StrategyConfig & c) {
    return json{
        { "tau_m2t", c.tau_m2t },       { "tau_t2t", c.tau_t2t },
        { "tau_lp", c.tau_lp },         { "tau_tr", c.tau_tr },
        { "tau_ld", c.tau_ld },         { "sigma", c.sigma },
        { "c_max", c.c_max },           { "rho_max", c.rho_max },
        { "n_transfer", c.n_transfer }, { "block_len", c.block_len },
        { "max_new_tokens", c.max_new_tokens }, { "max_inner_iters", c.max_inner_iters },
        { "seed", c.seed },
    };
}

} // namespace

json to_json(const TaskSet & tasks) {
    json instances = json::array();
    for (const auto & inst : tasks.instances) {
        json j{ { "prompt", tokens_json(inst.prompt) }, { "reference", tokens_json(inst.reference) } };
        if (inst.signal) {
            const auto & s = *inst.signal;
            j["signal"]    = json{
                { "reference", tokens_json(s.reference) },
                { "distractor", tokens_json(s.distractor) },
                { "alpha0", s.alpha0 },
                { "alpha1", s.alpha1 },
                { "alpha2", s.alpha2 },
                { "bias_spread", s.bias_spread },
                { "vocab_size", s.vocab_size },
                { "seed", inst.oracle_seed },
            };
        }
        if (inst.scenario) {
            j["scenario"] = inst.scenario->string();
        }
        instances.push_back(std::move(j));
    }
    return json{ { "config", config_json(tasks.base) }, { "instances", std::move(instances) } };
}

TaskSet task_set_from_json(const json & j) {
    try {
        TaskSet tasks;
        tasks.base = config_from_json(j.at("config"), StrategyConfig{});
        for (const auto & ij : j.at("instances")) {
            TaskInstance inst;
            inst.prompt    = tokens_from(ij.at("prompt"));
            inst.reference = tokens_from(ij.at("reference"));
            if (ij.contains("signal")) {
                const auto &      s = ij.at("signal");
                SignalModelParams sp;
                sp.reference   = tokens_from(s.at("reference"));
                sp.distractor  = tokens_from(s.at("distractor"));
                sp.alpha0      = s.at("alpha0").get<double>();
                sp.alpha1      = s.at("alpha1").get<double>();
                sp.alpha2      = s.at("alpha2").get<double>();
                sp.bias_spread = s.value("bias_spread", 0.0);
                sp.vocab_size  = s.at("vocab_size").get<TokenId>();
                inst.oracle_seed = s.value("seed", std::uint64_t{ 0 });
                inst.signal      = std::move(sp);
            }
            if (ij.contains("scenario")) {
                inst.scenario = ij.at("scenario").get<std::string>();
            }
            tasks.instances.push_back(std::move(inst));
        }
        tasks.validate();
        return tasks;
    } catch (const json::exception & ex) {
        throw ValidationError(std::string("malformed task set: ") + ex.what());
    }
}

TaskSet load_task_set(const std::filesystem::path & path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open task set " + path.string());
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error & ex) {
        throw ValidationError(path.string() + ": " + ex.what());
    }
    auto tasks = task_set_from_json(doc);
    // scenario paths are relative to the task file
    for (auto & inst : tasks.instances) {
        if (inst.scenario && inst.scenario->is_relative()) {
            inst.scenario = path.parent_path() / *inst.scenario;
        }
    }
    return tasks;
}

// --- sweep -------------------------------------------------------------------

SweepRow evaluate_point(const SweepPoint & point, const TaskSet & tasks,
                        const std::vector<std::unique_ptr<Oracle>> & oracles, bool keep_trajectories) {
    SweepRow row;
    row.point = point;
    try {
        const StrategyConfig config = point.apply(tasks.base);
        long remasks = 0, edits = 0, iters = 0;
        for (std::size_t i = 0; i < tasks.instances.size(); ++i) {
            const auto & inst   = tasks.instances[i];
            auto         result = generate(inst.prompt, *oracles[i], point.strategy, config);
            remasks += result.stats.remasks;
            edits += result.stats.edits;
            iters += result.stats.inner_iters;
            row.outcomes.push_back({ std::move(result.answer), inst.reference });
            if (keep_trajectories) {
                row.trajectories.push_back(std::move(result.trajectory));
            }
        }
        const auto n        = static_cast<double>(tasks.instances.size());
        row.accuracy        = classify_outcomes(row.outcomes).accuracy;
        row.avg_remasks     = static_cast<double>(remasks) / n;
        row.avg_edits       = static_cast<double>(edits) / n;
        row.avg_inner_iters = static_cast<double>(iters) / n;
    } catch (const std::exception & ex) {
        row.failed = true;
        row.error  = ex.what();
        row.outcomes.clear();
        row.trajectories.clear();
    }
    return row;
}

namespace {

std::vector<std::unique_ptr<Oracle>> build_oracles(const TaskSet & tasks) {
    tasks.validate();
    std::vector<std::unique_ptr<Oracle>> oracles;
    for (const auto & inst : tasks.instances) {
        oracles.push_back(inst.make_oracle());
    }
    return oracles;
}

} // namespace

std::vector<SweepRow> run_sweep_serial(const std::vector<SweepPoint> & points, const TaskSet & tasks,
                                       const SweepOptions & options) {
    const auto            oracles = build_oracles(tasks);
    std::vector<SweepRow> rows;
    for (const auto & p : points) {
        rows.push_back(evaluate_point(p, tasks, oracles, options.keep_trajectories));
    }
    return rows;
}

std::vector<SweepRow> run_sweep_parallel(const std::vector<SweepPoint> & points, const TaskSet & tasks,
                                         const SweepOptions & options) {
    const auto            oracles = build_oracles(tasks);
    std::vector<SweepRow> rows(points.size());
    const int             threads = options.threads > 0 ? options.threads : omp_get_max_threads();
    const auto            n       = static_cast<std::ptrdiff_t>(points.size());

#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        rows[static_cast<std::size_t>(i)] =
            evaluate_point(points[static_cast<std::size_t>(i)], tasks, oracles, options.keep_trajectories);
    }
    return rows;
}

void write_csv(std::ostream & out, const std::vector<SweepRow> & rows) {
    out << "strategy,tau,c_max,rho_max,accuracy,avg_remasks,avg_edits,avg_inner_iters\n";
    char buf[256];
    for (const auto & r : rows) {
        const auto & p = r.point;
        std::string  caps = p.c_max ? std::to_string(*p.c_max) : std::string();
        std::string  rho;
        if (p.rho_max) {
            std::snprintf(buf, sizeof(buf), "%g", *p.rho_max);
            rho = buf;
        }
        std::snprintf(buf, sizeof(buf), "%g", p.tau);
        out << to_string(p.strategy.kind) << ',' << buf << ',' << caps << ',' << rho << ',';
        if (r.failed) {
            out << "failed,,,\n";
            continue;
        }
        std::snprintf(buf, sizeof(buf), "%.4f,%.4f,%.4f,%.4f", r.accuracy, r.avg_remasks, r.avg_edits,
                      r.avg_inner_iters);
        out << buf << '\n';
    }
}

std::string to_csv(const std::vector<SweepRow> & rows) {
    std::ostringstream out;
    write_csv(out, rows);
    return out.str();
}

// --- scenario runner ---------------------------------------------------------

ScenarioReport run_scenario(const std::filesystem::path & path, StrategyKind strategy, const Oracle & oracle,
                            const json & overrides) {
    const ScenarioSpec spec = load_scenario_spec(path);
    if (!spec.run) {
        throw ValidationError(path.string() + " declares no run");
    }
    const StrategyConfig config = config_from_json(overrides, spec.run->config);

    ScenarioReport report;
    report.strategy = std::string(to_string(strategy));
    report.result   = generate(spec.run->prompt, oracle, EditingStrategy{ strategy }, config);

    const std::size_t prompt_len = spec.run->prompt.size();
    if (spec.run->expect) {
        const auto & ex = *spec.run->expect;
        for (std::size_t i = ex.span_begin; i < ex.span_end && prompt_len + i < report.result.tokens.size(); ++i) {
            report.span.push_back(report.result.tokens[prompt_len + i]);
        }
        auto it = ex.answers.find(report.strategy);
        if (it != ex.answers.end()) {
            report.expectation_met = report.span == it->second;
            std::string got, want;
            for (Token t : report.span) {
                got += (got.empty() ? "" : " ") + spec.label(t);
            }
            for (Token t : it->second) {
                want += (want.empty() ? "" : " ") + spec.label(t);
            }
            report.message = *report.expectation_met ? "expectation met: " + got
                                                     : "expectation failed: got [" + got + "], want [" + want + "]";
        } else {
            report.message = "no expectation declared for " + report.strategy;
        }
    }
    return report;
}

ScenarioReport run_scenario(const std::filesystem::path & path, StrategyKind strategy, const json & overrides) {
    const TabularOracle oracle = load_scenario(path);
    return run_scenario(path, strategy, oracle, overrides);
}

} // namespace remask
