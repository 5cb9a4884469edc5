#include "remask/analysis.hpp"

#include "remask/engine.hpp"
#include "remask/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

namespace remask {

using ordered_json = nlohmann::ordered_json;

void StuckParams::validate() const {
    if (!(epsilon > 0.0 && epsilon < tau_t2t && tau_t2t <= 1.0)) {
        throw ValidationError("stuck set needs 0 < epsilon < tau_t2t <= 1");
    }
}

std::vector<std::size_t> stuck_set(const BlockPosterior & posterior, const CurrentTokens & committed,
                                   const StuckParams & params) {
    params.validate();
    std::vector<std::size_t> out;
    for (const auto & [pos, tok] : committed) {
        const auto & ps = posterior.at(pos);
        if (!ps.current_p || ps.top.empty()) {
            throw ContractViolation("stuck_set needs current_p and top-1 at position " + std::to_string(pos));
        }
        if (*ps.current_p < params.epsilon && ps.top1().p < params.tau_t2t) {
            out.push_back(pos);
        }
    }
    return out;
}

namespace {

// Minimal single-block state holding exactly the committed tokens.
GenerationState state_for(const BlockPosterior & posterior, const CurrentTokens & committed) {
    GenerationState s;
    s.tokens.assign(posterior.block.end, kMask);
    s.prompt_len = posterior.block.start;
    s.block_len  = posterior.block.size();
    s.block      = posterior.block;
    s.remask_counts.assign(posterior.block.end, 0);
    s.edit_counts.assign(posterior.block.end, 0);
    s.prev_prob.assign(posterior.block.end, std::nullopt);
    for (const auto & [pos, tok] : committed) {
        s.tokens.at(pos) = tok;
    }
    return s;
}

} // namespace

StuckReport verify_stuck(const BlockPosterior & posterior, const CurrentTokens & committed,
                                    const StuckParams & params, double tau_lp) {
    params.validate();
    if (!(tau_lp > params.epsilon)) {
        throw ValidationError("stuck check requires tau_lp > epsilon");
    }
    const auto stuck = stuck_set(posterior, committed, params);
    const auto state = state_for(posterior, committed);

    StrategyConfig config;
    config.tau_t2t = params.tau_t2t;
    std::set<std::size_t> edited;
    for (const auto & e : t2t_edit_step(state, posterior, config)) {
        edited.insert(e.pos);
    }
    std::set<std::size_t> flagged;
    for (const auto & f : detect_lowprob(state, posterior, tau_lp)) {
        flagged.insert(f.pos);
    }

    StuckReport report;
    for (std::size_t pos : stuck) {
        StuckCheck c{ pos, edited.contains(pos), flagged.contains(pos) };
        report.pass = report.pass && !c.t2t_fires && c.lowprob_fires;
        report.positions.push_back(c);
    }
    return report;
}

void ContextQualityInput::validate() const {
    if (n_c < 0 || n_e < 0) {
        throw ValidationError("position counts must be non-negative");
    }
    if (!(s_plus > 0)) {
        throw ValidationError("s_plus must be positive");
    }
    if (!(s_minus < 0)) {
        throw ValidationError("s_minus must be negative");
    }
    if (!(sigma >= 0 && sigma <= 1)) {
        throw ValidationError("sigma must lie in [0, 1]");
    }
}

ContextQuality context_quality(const ContextQualityInput & in) {
    in.validate();
    ContextQuality q;
    q.q_random   = (1.0 - in.sigma) * (in.n_c * in.s_plus + in.n_e * in.s_minus);
    q.q_targeted = in.n_c * in.s_plus;
    q.advantage  = in.sigma * in.n_c * in.s_plus + (1.0 - in.sigma) * (-in.n_e * in.s_minus);
    return q;
}

std::vector<PrecisionPoint> precision_sweep(const ContextQualityInput & in, double budget,
                                            const std::vector<double> & precisions) {
    in.validate();
    const double n = in.n_c + in.n_e;
    if (!(budget > 0 && budget <= n)) {
        throw ValidationError("budget must lie in (0, n_c + n_e]");
    }
    const double base = in.n_e / n;
    auto quality = [&](double hit) {
        return (in.n_c - (1.0 - hit) * budget) * in.s_plus + (in.n_e - hit * budget) * in.s_minus;
    };
    std::vector<PrecisionPoint> out;
    for (double pr : precisions) {
        if (!(pr >= 0 && pr <= 1)) {
            throw ValidationError("precision must lie in [0, 1]");
        }
        PrecisionPoint pt;
        pt.precision  = pr;
        pt.feasible   = (1.0 - pr) * budget <= in.n_c + 1e-12 && pr * budget <= in.n_e + 1e-12;
        pt.q_detector = quality(pr);
        pt.q_random   = quality(base);
        pt.gain       = pt.q_detector - pt.q_random;
        out.push_back(pt);
    }
    return out;
}

namespace {

using StepKey = std::pair<std::size_t, int>;

std::map<StepKey, std::vector<TrajectoryEvent>> group_by_step(const std::vector<TrajectoryEvent> & events) {
    std::map<StepKey, std::vector<TrajectoryEvent>> out;
    for (const auto & e : events) {
        out[{ e.block_index, e.step }].push_back(e);
    }
    for (auto & [key, group] : out) {
        std::sort(group.begin(), group.end(), [](const TrajectoryEvent & x, const TrajectoryEvent & y) {
            return std::tie(x.pos, x.phase) < std::tie(y.pos, y.phase);
        });
    }
    return out;
}

std::optional<std::size_t> last_block(const Trajectory & t) {
    if (t.events.empty()) {
        return std::nullopt;
    }
    std::size_t hi = 0;
    for (const auto & e : t.events) {
        hi = std::max(hi, e.block_index);
    }
    return hi;
}

} // namespace

TrajectoryDiff trajectory_diff(const Trajectory & a, const Trajectory & b) {
    if (a.prompt_len != b.prompt_len) {
        throw ValidationError("trajectories have different prompt lengths");
    }
    TrajectoryDiff diff;

    const auto last_a = last_block(a);
    const auto last_b = last_block(b);
    std::optional<std::size_t> limit;  // inclusive last block compared
    if (last_a && last_b) {
        limit = std::min(*last_a, *last_b);
        diff.truncated = *last_a != *last_b;
    } else {
        diff.truncated = last_a.has_value() != last_b.has_value();
    }
    auto in_prefix = [&](const TrajectoryEvent & e) { return limit && e.block_index <= *limit; };

    std::vector<TrajectoryEvent> ea, eb;
    std::copy_if(a.events.begin(), a.events.end(), std::back_inserter(ea), in_prefix);
    std::copy_if(b.events.begin(), b.events.end(), std::back_inserter(eb), in_prefix);

    std::set<std::size_t> blocks;
    for (const auto & e : ea) {
        blocks.insert(e.block_index);
    }
    diff.common_blocks = blocks.size();

    for (const auto & e : ea) {
        auto & pd = diff.positions[e.pos];
        pd.a.push_back({ e.block_index, e.step, e.phase, e.new_token, e.prob });
        pd.final_a = e.new_token;
    }
    for (const auto & e : eb) {
        auto & pd = diff.positions[e.pos];
        pd.b.push_back({ e.block_index, e.step, e.phase, e.new_token, e.prob });
        pd.final_b = e.new_token;
    }

    const auto ga = group_by_step(ea);
    const auto gb = group_by_step(eb);
    std::set<StepKey> keys;
    for (const auto & [k, v] : ga) keys.insert(k);
    for (const auto & [k, v] : gb) keys.insert(k);
    for (const auto & key : keys) {
        auto ia = ga.find(key);
        auto ib = gb.find(key);
        if (ia == ga.end() || ib == gb.end() || ia->second != ib->second) {
            diff.first_divergence = DivergencePoint{ key.first, key.second };
            break;
        }
    }
    return diff;
}

namespace {

ordered_json token_json(const std::optional<Token> & t) {
    if (!t || t->is_mask()) {
        return nullptr;
    }
    return t->id;
}

ordered_json cells_json(const std::vector<DiffCell> & cells) {
    ordered_json out = ordered_json::array();
    for (const auto & c : cells) {
        out.push_back({ { "block_index", c.block_index },
                        { "step", c.step },
                        { "phase", to_string(c.phase) },
                        { "token", token_json(c.token) },
                        { "prob", c.prob } });
    }
    return out;
}

std::string cell_text(const DiffCell & c, const std::function<std::string(Token)> & label) {
    char prob[32];
    std::snprintf(prob, sizeof(prob), "%.2g", c.prob);
    std::string tok = c.token.is_mask() ? "[M]" : (label ? label(c.token) : std::to_string(c.token.id));
    return "t" + std::to_string(c.step) + ":" + tok + "(" + prob + ")";
}

} // namespace

ordered_json to_json(const TrajectoryDiff & diff) {
    ordered_json j;
    j["first_divergence"] = diff.first_divergence
        ? ordered_json{ { "block_index", diff.first_divergence->block_index }, { "step", diff.first_divergence->step } }
        : ordered_json(nullptr);
    j["truncated"]     = diff.truncated;
    j["common_blocks"] = diff.common_blocks;
    ordered_json positions = ordered_json::array();
    for (const auto & [pos, pd] : diff.positions) {
        positions.push_back({ { "pos", pos },
                              { "final_a", token_json(pd.final_a) },
                              { "final_b", token_json(pd.final_b) },
                              { "a", cells_json(pd.a) },
                              { "b", cells_json(pd.b) } });
    }
    j["positions"] = std::move(positions);
    return j;
}

std::string render_diff_table(const TrajectoryDiff & diff, const std::function<std::string(Token)> & label) {
    std::vector<std::array<std::string, 3>> rows;
    rows.push_back({ "pos", "A", "B" });
    for (const auto & [pos, pd] : diff.positions) {
        std::string a, b;
        for (const auto & c : pd.a) {
            a += (a.empty() ? "" : " ") + cell_text(c, label);
        }
        for (const auto & c : pd.b) {
            b += (b.empty() ? "" : " ") + cell_text(c, label);
        }
        rows.push_back({ std::to_string(pos), a, b });
    }
    std::array<std::size_t, 3> width{};
    for (const auto & r : rows) {
        for (std::size_t i = 0; i < 3; ++i) {
            width[i] = std::max(width[i], r[i].size());
        }
    }
    std::ostringstream out;
    for (const auto & r : rows) {
        for (std::size_t i = 0; i < 3; ++i) {
            out << r[i];
            if (i + 1 < 3) {
                out << std::string(width[i] - r[i].size(), ' ') << " | ";
            }
        }
        out << '\n';
    }
    if (diff.first_divergence) {
        out << "first divergence: block " << diff.first_divergence->block_index << ", step "
            << diff.first_divergence->step << '\n';
    } else {
        out << "no divergence\n";
    }
    if (diff.truncated) {
        out << "(compared over the first " << diff.common_blocks << " common block(s))\n";
    }
    return out.str();
}

AccuracyReport classify_outcomes(const std::vector<Outcome> & results) {
    AccuracyReport r;
    r.total = results.size();
    for (const auto & o : results) {
        r.correct += o.correct() ? 1 : 0;
    }
    r.accuracy = r.total ? static_cast<double>(r.correct) / static_cast<double>(r.total) : 0.0;
    return r;
}

PairedReport classify_paired(const std::vector<Outcome> & base, const std::vector<Outcome> & other) {
    if (base.size() != other.size()) {
        throw ValidationError("paired outcome lists differ in length");
    }
    PairedReport r;
    r.total = base.size();
    for (std::size_t i = 0; i < base.size(); ++i) {
        if (base[i].reference != other[i].reference) {
            throw ValidationError("paired outcome " + std::to_string(i) + " has different references");
        }
        const bool before = base[i].correct();
        const bool after  = other[i].correct();
        if (!before && after) ++r.repaired;
        else if (before && !after) ++r.broken;
        else if (before) ++r.unchanged_right;
        else ++r.unchanged_wrong;
    }
    r.net_points = r.total
        ? 100.0 * (static_cast<double>(r.repaired) - static_cast<double>(r.broken)) / static_cast<double>(r.total)
        : 0.0;
    return r;
}

ordered_json to_json(const StuckReport & r) {
    ordered_json positions = ordered_json::array();
    for (const auto & c : r.positions) {
        positions.push_back({ { "pos", c.pos }, { "t2t_fires", c.t2t_fires }, { "lowprob_fires", c.lowprob_fires } });
    }
    return { { "pass", r.pass }, { "stuck", std::move(positions) } };
}

ordered_json to_json(const ContextQuality & q) {
    return { { "q_random", q.q_random }, { "q_targeted", q.q_targeted }, { "advantage", q.advantage } };
}

ordered_json to_json(const std::vector<PrecisionPoint> & sweep) {
    ordered_json out = ordered_json::array();
    for (const auto & p : sweep) {
        out.push_back({ { "precision", p.precision },
                        { "feasible", p.feasible },
                        { "q_detector", p.q_detector },
                        { "q_random", p.q_random },
                        { "gain", p.gain } });
    }
    return out;
}

ordered_json to_json(const PairedReport & r) {
    return { { "total", r.total },
             { "repaired", r.repaired },
             { "broken", r.broken },
             { "unchanged_right", r.unchanged_right },
             { "unchanged_wrong", r.unchanged_wrong },
             { "net_points", r.net_points } };
}

} // namespace remask
