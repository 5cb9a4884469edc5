#pragma once

#include "remask/config.hpp"
#include "remask/oracle.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace remask {

// Per-position pattern element of a scripted rule.
struct Matcher {
    enum class Kind { exact, mask, any };

    Kind  kind = Kind::any;
    Token token;

    bool matches(Token t) const noexcept;
};

// Token distribution, sorted by token id.
using Distribution = std::vector<Candidate>;

struct Rule {
    std::optional<std::size_t>          block_start;  // restrict to the block starting here
    std::vector<Matcher>                pattern;      // one matcher per block position
    std::map<std::size_t, Distribution> outputs;      // block-relative position -> distribution
};

// Answers a scenario run is expected to produce, per strategy name, over the
// response-relative span [span_begin, span_end).
struct ScenarioExpectation {
    std::size_t                                  span_begin = 0;
    std::size_t                                  span_end   = 0;
    std::map<std::string, std::vector<Token>>    answers;
};

struct ScenarioRun {
    std::vector<Token>                 prompt;
    StrategyConfig                     config;
    std::optional<ScenarioExpectation> expect;
};

struct ScenarioSpec {
    TokenId                    vocab_size = 0;
    int                        k          = 8;
    std::optional<TokenId>     eos;
    std::optional<TokenId>     pad;
    std::vector<Rule>          rules;
    Distribution               default_dist;
    std::vector<std::string>   labels;  // optional display names indexed by token id
    std::optional<ScenarioRun> run;

    std::string label(Token t) const;
};

// Parses and validates a scenario document. Throws ValidationError on parse
// errors, unnormalized distributions or pattern length mismatches.
ScenarioSpec parse_scenario(const nlohmann::json & doc);
ScenarioSpec load_scenario_spec(const std::filesystem::path & path);

// Applies StrategyConfig field overrides from a JSON object onto `base`.
StrategyConfig config_from_json(const nlohmann::json & j, StrategyConfig base);

// Scripted oracle: the first rule whose pattern matches the block answers;
// positions a rule does not list fall back to default_dist.
class TabularOracle final : public Oracle {
public:
    explicit TabularOracle(ScenarioSpec spec);

    Vocabulary vocabulary() const override;
    BlockPosterior score_block(std::span<const Token> visible,
                               BlockRange             block,
                               const CurrentTokens &  current) const override;

    const ScenarioSpec & spec() const noexcept { return spec_; }

    // Index of the rule that answers this block state, if any.
    std::optional<std::size_t> matching_rule(std::span<const Token> visible, BlockRange block) const;

private:
    ScenarioSpec spec_;
};

TabularOracle load_scenario(const std::filesystem::path & path);

} // namespace remask
