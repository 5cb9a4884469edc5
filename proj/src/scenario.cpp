#include "remask/scenario.hpp"

#include "remask/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

namespace remask {

using nlohmann::json;

namespace {

constexpr double kNormTolerance = 1e-9;

class TokenResolver {
public:
    TokenResolver(TokenId vocab_size, const std::vector<std::string> & labels)
        : vocab_size_(vocab_size), labels_(labels) {}

    Token resolve(const json & j) const {
        if (j.is_number_integer()) {
            return checked(j.get<TokenId>());
        }
        if (!j.is_string()) {
            throw ValidationError("token reference must be an integer or a label");
        }
        return resolve(j.get<std::string>());
    }

    Token resolve(const std::string & s) const {
        TokenId id{};
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), id);
        if (ec == std::errc() && ptr == s.data() + s.size()) {
            return checked(id);
        }
        auto it = std::find(labels_.begin(), labels_.end(), s);
        if (it == labels_.end()) {
            throw ValidationError("unknown token label '" + s + "'");
        }
        return checked(static_cast<TokenId>(it - labels_.begin()));
    }

private:
    Token checked(TokenId id) const {
        if (id < 0 || id >= vocab_size_) {
            throw ValidationError("token id " + std::to_string(id) + " outside vocabulary");
        }
        return Token{ id };
    }

    TokenId                          vocab_size_;
    const std::vector<std::string> & labels_;
};

Distribution parse_distribution(const json & j, const TokenResolver & tokens) {
    if (!j.is_object()) {
        throw ValidationError("distribution must be an object of token -> probability");
    }
    Distribution dist;
    double       mass = 0.0;
    for (const auto & [key, value] : j.items()) {
        const double p = value.get<double>();
        if (!(p >= 0.0 && p <= 1.0)) {
            throw ValidationError("probability outside [0, 1] for token '" + key + "'");
        }
        const Token t = tokens.resolve(key);
        if (std::any_of(dist.begin(), dist.end(), [&](const Candidate & c) { return c.token == t; })) {
            throw ValidationError("duplicate token '" + key + "' in distribution");
        }
        dist.push_back({ t, p });
        mass += p;
    }
    if (std::fabs(mass - 1.0) > kNormTolerance) {
        throw ValidationError("distribution is not normalized (sums to " + std::to_string(mass) + ")");
    }
    std::sort(dist.begin(), dist.end(), [](const Candidate & a, const Candidate & b) { return a.token.id < b.token.id; });
    return dist;
}

Matcher parse_matcher(const json & j, const TokenResolver & tokens) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "M") {
            return { Matcher::Kind::mask, kMask };
        }
        if (s == "*") {
            return { Matcher::Kind::any, kMask };
        }
    }
    return { Matcher::Kind::exact, tokens.resolve(j) };
}

// Lengths of every block the run's grid produces.
std::set<std::size_t> block_lengths(const ScenarioRun & run) {
    std::set<std::size_t> out;
    const std::size_t     b     = static_cast<std::size_t>(run.config.block_len);
    const std::size_t     total = run.prompt.size() + static_cast<std::size_t>(run.config.max_new_tokens);
    for (std::size_t start = (run.prompt.size() / b) * b; start < total; start += b) {
        out.insert(std::min(start + b, total) - start);
    }
    return out;
}

double probability_of(const Distribution & dist, Token t) {
    auto it = std::lower_bound(dist.begin(), dist.end(), t.id,
                               [](const Candidate & c, TokenId id) { return c.token.id < id; });
    return (it != dist.end() && it->token == t) ? it->p : 0.0;
}

} // namespace

bool Matcher::matches(Token t) const noexcept {
    switch (kind) {
        case Kind::any:   return true;
        case Kind::mask:  return t.is_mask();
        case Kind::exact: return t == token;
    }
    return false;
}

std::string ScenarioSpec::label(Token t) const {
    if (t.is_mask()) {
        return "[M]";
    }
    if (t.id < static_cast<TokenId>(labels.size())) {
        return labels[static_cast<std::size_t>(t.id)];
    }
    return std::to_string(t.id);
}

StrategyConfig config_from_json(const json & j, StrategyConfig c) {
    if (!j.is_object()) {
        throw ValidationError("config overrides must be an object");
    }
    for (const auto & [key, v] : j.items()) {
        if (key == "tau_m2t") c.tau_m2t = v.get<double>();
        else if (key == "tau_t2t") c.tau_t2t = v.get<double>();
        else if (key == "tau_lp") c.tau_lp = v.get<double>();
        else if (key == "tau_tr") c.tau_tr = v.get<double>();
        else if (key == "tau_ld") c.tau_ld = v.get<double>();
        else if (key == "sigma") c.sigma = v.get<double>();
        else if (key == "c_max") c.c_max = v.get<int>();
        else if (key == "rho_max") c.rho_max = v.get<double>();
        else if (key == "n_transfer") c.n_transfer = v.get<int>();
        else if (key == "block_len") c.block_len = v.get<int>();
        else if (key == "max_new_tokens") c.max_new_tokens = v.get<int>();
        else if (key == "max_inner_iters") c.max_inner_iters = v.get<int>();
        else if (key == "seed") c.seed = v.get<std::uint64_t>();
        else throw ValidationError("unknown config field '" + key + "'");
    }
    return c;
}

ScenarioSpec parse_scenario(const json & doc) {
    try {
        ScenarioSpec spec;
        spec.vocab_size = doc.at("vocab_size").get<TokenId>();
        if (spec.vocab_size < 1) {
            throw ValidationError("vocab_size must be positive");
        }
        spec.k = doc.value("k", 8);
        if (spec.k < 1) {
            throw ValidationError("k must be positive");
        }
        if (doc.contains("labels")) {
            spec.labels = doc.at("labels").get<std::vector<std::string>>();
            if (spec.labels.size() > static_cast<std::size_t>(spec.vocab_size)) {
                throw ValidationError("more labels than vocabulary entries");
            }
        }
        const TokenResolver tokens(spec.vocab_size, spec.labels);

        if (doc.contains("eos_id")) {
            spec.eos = tokens.resolve(doc.at("eos_id")).id;
        }
        if (doc.contains("pad_id")) {
            spec.pad = tokens.resolve(doc.at("pad_id")).id;
        }
        if (spec.eos && spec.pad && *spec.eos == *spec.pad) {
            throw ValidationError("eos_id and pad_id must differ");
        }

        spec.default_dist = parse_distribution(doc.at("default_dist"), tokens);

        for (const auto & r : doc.at("rules")) {
            Rule rule;
            for (const auto & m : r.at("pattern")) {
                rule.pattern.push_back(parse_matcher(m, tokens));
            }
            if (rule.pattern.empty()) {
                throw ValidationError("rule pattern must not be empty");
            }
            if (r.contains("block_start")) {
                rule.block_start = r.at("block_start").get<std::size_t>();
            }
            for (const auto & [key, dist] : r.at("outputs").items()) {
                const std::size_t pos = std::stoul(key);
                if (pos >= rule.pattern.size()) {
                    throw ValidationError("rule output position " + key + " lies outside the block");
                }
                rule.outputs.emplace(pos, parse_distribution(dist, tokens));
            }
            spec.rules.push_back(std::move(rule));
        }

        if (doc.contains("run")) {
            const auto & r = doc.at("run");
            ScenarioRun  run;
            for (const auto & t : r.at("prompt")) {
                run.prompt.push_back(tokens.resolve(t));
            }
            if (r.contains("config")) {
                run.config = config_from_json(r.at("config"), run.config);
            }
            run.config.validate();
            if (r.contains("expect")) {
                const auto &        e = r.at("expect");
                ScenarioExpectation ex;
                const auto          span = e.at("span").get<std::vector<std::size_t>>();
                if (span.size() != 2 || span[0] > span[1]) {
                    throw ValidationError("expect.span must be [begin, end]");
                }
                ex.span_begin = span[0];
                ex.span_end   = span[1];
                for (const auto & [name, answer] : e.at("answers").items()) {
                    if (!parse_strategy(name)) {
                        throw ValidationError("unknown strategy '" + name + "' in expectations");
                    }
                    std::vector<Token> toks;
                    for (const auto & t : answer) {
                        toks.push_back(tokens.resolve(t));
                    }
                    if (toks.size() != ex.span_end - ex.span_begin) {
                        throw ValidationError("expected answer for '" + name + "' does not match span length");
                    }
                    ex.answers.emplace(name, std::move(toks));
                }
                run.expect = std::move(ex);
            }
            spec.run = std::move(run);

            const auto lengths = block_lengths(*spec.run);
            for (const auto & rule : spec.rules) {
                if (!lengths.contains(rule.pattern.size())) {
                    throw ValidationError("rule pattern length " + std::to_string(rule.pattern.size()) +
                                          " matches no block of the run");
                }
            }
        }
        return spec;
    } catch (const json::exception & ex) {
        throw ValidationError(std::string("scenario parse error: ") + ex.what());
    }
}

ScenarioSpec load_scenario_spec(const std::filesystem::path & path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open scenario file " + path.string());
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception & ex) {
        throw ValidationError("scenario parse error in " + path.string() + ": " + ex.what());
    }
    return parse_scenario(doc);
}

TabularOracle::TabularOracle(ScenarioSpec spec) : spec_(std::move(spec)) {}

Vocabulary TabularOracle::vocabulary() const {
    return { spec_.vocab_size, spec_.eos, spec_.pad };
}

std::optional<std::size_t> TabularOracle::matching_rule(std::span<const Token> visible, BlockRange block) const {
    for (std::size_t r = 0; r < spec_.rules.size(); ++r) {
        const auto & rule = spec_.rules[r];
        if (rule.pattern.size() != block.size()) {
            continue;
        }
        if (rule.block_start && *rule.block_start != block.start) {
            continue;
        }
        bool ok = true;
        for (std::size_t i = 0; i < block.size() && ok; ++i) {
            ok = rule.pattern[i].matches(visible[block.start + i]);
        }
        if (ok) {
            return r;
        }
    }
    return std::nullopt;
}

BlockPosterior TabularOracle::score_block(std::span<const Token> visible,
                                          BlockRange             block,
                                          const CurrentTokens &  current) const {
    if (visible.size() != block.end) {
        throw ContractViolation("visible prefix must end at the block boundary");
    }
    const auto   rule_idx = matching_rule(visible, block);
    const Rule * rule     = rule_idx ? &spec_.rules[*rule_idx] : nullptr;

    BlockPosterior out;
    out.block = block;
    out.k     = spec_.k;
    out.positions.resize(block.size());
    for (std::size_t i = 0; i < block.size(); ++i) {
        const Distribution * dist = &spec_.default_dist;
        if (rule) {
            if (auto it = rule->outputs.find(i); it != rule->outputs.end()) {
                dist = &it->second;
            }
        }
        auto & ps = out.positions[i];
        for (const auto & c : *dist) {
            if (c.p > 0.0) {
                ps.top.push_back(c);
            }
        }
        sort_candidates(ps.top);
        if (ps.top.size() > static_cast<std::size_t>(spec_.k)) {
            ps.top.resize(static_cast<std::size_t>(spec_.k));
        }
        if (auto it = current.find(block.start + i); it != current.end()) {
            ps.current_p = probability_of(*dist, it->second);
        }
    }
    return out;
}

TabularOracle load_scenario(const std::filesystem::path & path) {
    return TabularOracle(load_scenario_spec(path));
}

} // namespace remask
