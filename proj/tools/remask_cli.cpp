// remask: scenario runner, ablation sweep, task generator and analysis tools.

#include "remask/analysis.hpp"
#include "remask/errors.hpp"
#include "remask/remote_oracle.hpp"
#include "remask/scenario.hpp"
#include "remask/sweep.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <optional>

using namespace remask;
using nlohmann::json;

namespace {

// --tau_m2t ... --seed; only the flags given end up in the override object.
struct ConfigFlags {
    std::map<std::string, double>        reals;
    std::map<std::string, int>           ints;
    std::optional<std::uint64_t>         seed;

    void add(CLI::App & app) {
        for (const char * name : { "tau_m2t", "tau_t2t", "tau_lp", "tau_tr", "tau_ld", "sigma", "rho_max" }) {
            app.add_option_function<double>("--" + std::string(name), [this, name](double v) { reals[name] = v; });
        }
        for (const char * name : { "c_max", "n_transfer", "block_len", "max_new_tokens", "max_inner_iters" }) {
            app.add_option_function<int>("--" + std::string(name), [this, name](int v) { ints[name] = v; });
        }
        app.add_option_function<std::uint64_t>("--seed", [this](std::uint64_t v) { seed = v; });
    }

    json overrides() const {
        json j = json::object();
        for (const auto & [k, v] : reals) j[k] = v;
        for (const auto & [k, v] : ints) j[k] = v;
        if (seed) j["seed"] = *seed;
        return j;
    }
};

StrategyKind strategy_or_throw(const std::string & name) {
    auto kind = parse_strategy(name);
    if (!kind) {
        throw ValidationError("unknown strategy '" + name + "'");
    }
    return *kind;
}

void write_file(const std::string & path, const std::string & text) {
    if (path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ValidationError("cannot write " + path);
    }
    out << text;
}

json read_json(const std::string & path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open " + path);
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error & ex) {
        throw ValidationError(path + ": " + ex.what());
    }
}

Trajectory read_trajectory(const std::string & path, std::size_t prompt_len) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open " + path);
    }
    return read_jsonl(in, prompt_len);
}

} // namespace

int main(int argc, char ** argv) {
    CLI::App app{ "masked-diffusion decoding with token editing and remasking" };
    app.require_subcommand(1);

    // run ---------------------------------------------------------------------
    auto *      run = app.add_subcommand("run", "run a scenario file under one strategy");
    std::string scenario_path, run_strategy = "t2m_lowprob", traj_out, summary_out;
    ConfigFlags run_flags;
    run->add_option("scenario", scenario_path, "scenario JSON")->required()->check(CLI::ExistingFile);
    run->add_option("--strategy", run_strategy, "none|t2t_replace|t2m_lowprob|t2m_t2ttrigger|t2m_logitdiff|random_remask");
    run->add_option("--trajectory", traj_out, "write the trajectory JSON-lines here");
    run->add_option("--summary", summary_out, "write the summary JSON here (default: stdout)");
    run_flags.add(*run);

    // sweep -------------------------------------------------------------------
    auto *      sweep = app.add_subcommand("sweep", "run the ablation grid over a task set");
    std::string tasks_path, csv_out = "-";
    std::size_t sweep_n = 20, sweep_len = 32;
    std::uint64_t sweep_seed = 42;
    int         threads = 0;
    bool        serial  = false;
    ConfigFlags sweep_flags;
    sweep->add_option("--tasks", tasks_path, "task set JSON (default: generate a signal-model task)");
    sweep->add_option("--instances", sweep_n, "instances of the generated task");
    sweep->add_option("--length", sweep_len, "answer length of the generated task");
    sweep->add_option("--task-seed", sweep_seed, "seed of the generated task");
    sweep->add_option("--out", csv_out, "CSV output path, - for stdout");
    sweep->add_option("--threads", threads, "worker threads, 0 for the OpenMP default");
    sweep->add_flag("--serial", serial, "use the single-threaded reference loop");
    sweep_flags.add(*sweep);

    // gen-task ----------------------------------------------------------------
    auto *           gen = app.add_subcommand("gen-task", "generate a signal-model task set");
    std::size_t      gen_n = 20, gen_len = 32;
    std::uint64_t    gen_seed = 42;
    SignalTaskParams gp;
    std::string      gen_out = "-";
    gen->add_option("--instances", gen_n);
    gen->add_option("--length", gen_len);
    gen->add_option("--seed", gen_seed);
    gen->add_option("--prompt-len", gp.prompt_len);
    gen->add_option("--vocab-size", gp.vocab_size);
    gen->add_option("--alpha0", gp.alpha0);
    gen->add_option("--alpha1", gp.alpha1);
    gen->add_option("--alpha2", gp.alpha2);
    gen->add_option("--bias-spread", gp.bias_spread);
    gen->add_option("--block_len", gp.block_len);
    gen->add_option("--out", gen_out);

    // analyze -----------------------------------------------------------------
    auto * analyze = app.add_subcommand("analyze", "trajectory diff, stuck-set check, context quality");
    analyze->require_subcommand(1);

    auto *      diff = analyze->add_subcommand("diff", "compare two trajectory files");
    std::string diff_a, diff_b, diff_labels;
    std::size_t diff_prompt_len = 0;
    bool        diff_json       = false;
    diff->add_option("a", diff_a)->required()->check(CLI::ExistingFile);
    diff->add_option("b", diff_b)->required()->check(CLI::ExistingFile);
    diff->add_option("--prompt-len", diff_prompt_len, "prompt length both runs share")->required();
    diff->add_option("--scenario", diff_labels, "scenario file providing token labels");
    diff->add_flag("--json", diff_json, "emit JSON instead of the text table");

    auto *      stuck = analyze->add_subcommand("stuck", "check T2T vs LowProb on the stuck set of a posterior");
    std::string stuck_path;
    double      eps = 0.01, stuck_t2t = 0.5, stuck_lp = 0.3;
    stuck->add_option("posterior", stuck_path,
                     "JSON {block:[s,e], positions:[{pos,top,current_p}], current:{pos:id}}")
        ->required()
        ->check(CLI::ExistingFile);
    stuck->add_option("--epsilon", eps);
    stuck->add_option("--tau_t2t", stuck_t2t);
    stuck->add_option("--tau_lp", stuck_lp);

    auto *              cq = analyze->add_subcommand("context-quality", "random vs targeted remasking");
    ContextQualityInput cq_in;
    std::optional<double> budget;
    cq->add_option("--n-c", cq_in.n_c)->required();
    cq->add_option("--n-e", cq_in.n_e)->required();
    cq->add_option("--s-plus", cq_in.s_plus);
    cq->add_option("--s-minus", cq_in.s_minus);
    cq->add_option("--sigma", cq_in.sigma);
    cq->add_option("--budget", budget, "also sweep detector precision 0..1 at this remask budget");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            const StrategyKind kind = strategy_or_throw(run_strategy);
            ScenarioReport     report;
            if (auto url = oracle_url_from_env()) {
                RemoteOracle oracle(*url);
                report = run_scenario(scenario_path, kind, oracle, run_flags.overrides());
            } else {
                report = run_scenario(scenario_path, kind, run_flags.overrides());
            }
            if (!traj_out.empty()) {
                write_file(traj_out, to_jsonl(report.result.trajectory));
            }
            const std::string summary = summary_json(report.result) + "\n";
            if (summary_out.empty()) {
                std::cout << summary;
            } else {
                write_file(summary_out, summary);
            }
            for (const auto & w : report.result.stats.warnings) {
                std::cerr << "warning: " << w << '\n';
            }
            if (!report.message.empty()) {
                std::cerr << report.message << '\n';
            }
            return report.expectation_met.value_or(true) ? 0 : 1;
        }

        if (sweep->parsed()) {
            TaskSet tasks = tasks_path.empty() ? gen_signal_task(sweep_n, sweep_len, SignalTaskParams{}, sweep_seed)
                                               : load_task_set(tasks_path);
            tasks.base = config_from_json(sweep_flags.overrides(), tasks.base);
            const auto   points = SweepGrid{}.points();
            SweepOptions opts;
            opts.threads = threads;
            const auto rows = serial ? run_sweep_serial(points, tasks, opts) : run_sweep_parallel(points, tasks, opts);
            write_file(csv_out, to_csv(rows));
            for (const auto & r : rows) {
                if (r.failed) {
                    std::cerr << "row " << to_string(r.point.strategy.kind) << " tau=" << r.point.tau
                              << " failed: " << r.error << '\n';
                }
            }
            return 0;
        }

        if (gen->parsed()) {
            write_file(gen_out, to_json(gen_signal_task(gen_n, gen_len, gp, gen_seed)).dump(1) + "\n");
            return 0;
        }

        if (diff->parsed()) {
            const auto d = trajectory_diff(read_trajectory(diff_a, diff_prompt_len),
                                           read_trajectory(diff_b, diff_prompt_len));
            if (diff_json) {
                std::cout << to_json(d).dump(2) << '\n';
            } else if (!diff_labels.empty()) {
                const ScenarioSpec spec = load_scenario_spec(diff_labels);
                std::cout << render_diff_table(d, [&](Token t) { return spec.label(t); });
            } else {
                std::cout << render_diff_table(d);
            }
            return 0;
        }

        if (stuck->parsed()) {
            const json    doc = read_json(stuck_path);
            const auto    se  = doc.at("block").get<std::vector<std::size_t>>();
            if (se.size() != 2 || se[0] >= se[1]) {
                throw ValidationError("block must be [start, end)");
            }
            const BlockRange     block{ se[0], se[1] };
            const BlockPosterior posterior = wire::decode_response(doc, block, doc.value("k", 8));
            CurrentTokens        committed;
            for (const auto & [key, id] : doc.at("current").items()) {
                committed.emplace(std::stoul(key), Token{ id.get<TokenId>() });
            }
            const auto report = verify_stuck(posterior, committed, StuckParams{ eps, stuck_t2t }, stuck_lp);
            std::cout << to_json(report).dump(2) << '\n';
            return report.pass ? 0 : 1;
        }

        if (cq->parsed()) {
            nlohmann::ordered_json out = to_json(context_quality(cq_in));
            if (budget) {
                std::vector<double> precisions;
                for (int i = 0; i <= 10; ++i) {
                    precisions.push_back(i / 10.0);
                }
                out["precision_sweep"] = to_json(precision_sweep(cq_in, *budget, precisions));
            }
            std::cout << out.dump(2) << '\n';
            return 0;
        }
    } catch (const OracleError & ex) {
        std::cerr << "oracle error: " << ex.what() << '\n';
        return 3;
    } catch (const std::exception & ex) {
        std::cerr << "error: " << ex.what() << '\n';
        return 2;
    }
    return 0;
}
