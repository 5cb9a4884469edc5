#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support/helpers.hpp"

#include "remask/errors.hpp"
#include "remask/scenario.hpp"
#include "remask/signal_oracle.hpp"

#include <cmath>

using namespace remask;
using namespace testing;
using nlohmann::json;

namespace {

std::vector<Token> tokens_of(const ScenarioSpec & spec, std::initializer_list<const char *> names) {
    std::vector<Token> out;
    for (const char * n : names) {
        if (std::string(n) == "M") {
            out.push_back(kMask);
            continue;
        }
        auto it = std::find(spec.labels.begin(), spec.labels.end(), n);
        REQUIRE(it != spec.labels.end());
        out.push_back(Token{ static_cast<TokenId>(it - spec.labels.begin()) });
    }
    return out;
}

double prob_of(const PositionScore & ps, Token t) {
    for (const auto & c : ps.top) {
        if (c.token == t) {
            return c.p;
        }
    }
    return 0.0;
}

} // namespace

TEST_CASE("figure 2 contexts") {
    const TabularOracle oracle = load_scenario(fixture("fig2.json"));
    const auto &        spec   = oracle.spec();
    const Token         eiffel = tokens_of(spec, { "Eiffel" })[0];
    const Token         tokyo  = tokens_of(spec, { "Tokyo" })[0];
    const BlockRange    block{ 0, 9 };

    auto query = [&](const char * x) {
        auto visible = tokens_of(spec, { "I", "went", "to", x, "and", "visited", "the", "M", "M" });
        return oracle.score_block(visible, block, {}).at(7);
    };
    const auto aligned     = query("France");
    const auto null_ctx    = query("M");
    const auto adversarial = query("Japan");
    const auto noise       = query("banana");

    CHECK(aligned.top1().token == eiffel);
    CHECK(aligned.top1().p == doctest::Approx(0.97));
    CHECK(null_ctx.top1().token == eiffel);
    CHECK(null_ctx.top1().p == doctest::Approx(0.82));
    CHECK(adversarial.top1().token == tokyo);
    CHECK(adversarial.top1().p == doctest::Approx(0.91));
    CHECK(noise.top1().token == eiffel);
    CHECK(noise.top1().p == doctest::Approx(0.33));

    // aligned > null > noise > adversarial for the correct token
    CHECK(prob_of(aligned, eiffel) > prob_of(null_ctx, eiffel));
    CHECK(prob_of(null_ctx, eiffel) > prob_of(noise, eiffel));
    CHECK(prob_of(noise, eiffel) > prob_of(adversarial, eiffel));
}

TEST_CASE("figure 1a posterior around purple") {
    const TabularOracle oracle = load_scenario(fixture("fig1a.json"));
    const auto &        spec   = oracle.spec();
    auto visible = tokens_of(spec, { "<s>", "Write", "I", "feel", "so", "purple", "today", "." });
    CurrentTokens current;
    for (std::size_t i = 2; i < 8; ++i) {
        current[i] = visible[i];
    }
    const auto post = oracle.score_block(visible, { 0, 8 }, current);
    const auto & x  = post.at(5);
    REQUIRE(x.current_p.has_value());
    CHECK(*x.current_p == doctest::Approx(2e-5));
    CHECK(spec.label(x.top1().token) == "sad");
    CHECK(x.top1().p == doctest::Approx(0.12));
    CHECK(spec.label(x.top[1].token) == "happy");
    CHECK(x.top.size() == 8);  // k truncation
    CHECK_NOTHROW(validate_posterior(post, { 0, 8 }, current, oracle.vocabulary()));
}

TEST_CASE("drop160 posteriors") {
    const TabularOracle oracle = load_scenario(fixture("drop160.json"));
    const auto &        spec   = oracle.spec();
    auto v1 = tokens_of(spec, { "Q", "?", "The", "answer", "is", "8", "M", "M" });
    CurrentTokens c1{ { 2, v1[2] }, { 3, v1[3] }, { 4, v1[4] }, { 5, v1[5] } };
    const auto p1 = oracle.score_block(v1, { 0, 8 }, c1).at(5);
    CHECK(*p1.current_p == doctest::Approx(0.11));
    CHECK(spec.label(p1.top1().token) == "6");
    CHECK(p1.top1().p == doctest::Approx(0.64));

    auto v2 = tokens_of(spec, { "Q", "?", "The", "answer", "is", "M", "5", "7" });
    const auto p2 = oracle.score_block(v2, { 0, 8 }, {}).at(5);
    CHECK(spec.label(p2.top1().token) == "8");
    CHECK(p2.top1().p == doctest::Approx(0.94));
}

TEST_CASE("scenario validation") {
    json base = json::parse(R"({
        "vocab_size": 4, "k": 2, "default_dist": {"0": 0.5, "1": 0.5},
        "rules": [{"pattern": ["M", "*"], "outputs": {"0": {"2": 0.9, "3": 0.1}}}]
    })");
    CHECK_NOTHROW(parse_scenario(base));

    json unnormalized = base;
    unnormalized["rules"][0]["outputs"]["0"] = { { "2", 0.7 }, { "3", 0.1 } };
    CHECK_THROWS_AS(parse_scenario(unnormalized), ValidationError);

    json outside = base;
    outside["rules"][0]["outputs"]["5"] = { { "2", 1.0 } };
    CHECK_THROWS_AS(parse_scenario(outside), ValidationError);

    json bad_token = base;
    bad_token["default_dist"] = { { "9", 1.0 } };
    CHECK_THROWS_AS(parse_scenario(bad_token), ValidationError);

    json with_run = base;
    with_run["run"] = { { "prompt", { 0 } }, { "config", { { "block_len", 3 }, { "max_new_tokens", 2 } } } };
    CHECK_THROWS_AS(parse_scenario(with_run), ValidationError);  // pattern of 2 fits no block of 3
    with_run["run"]["config"]["block_len"] = 2;
    with_run["run"]["config"]["max_new_tokens"] = 3;
    CHECK_NOTHROW(parse_scenario(with_run));

    CHECK_THROWS_AS(load_scenario_spec(fixture("does-not-exist.json")), ValidationError);
}

TEST_CASE("empty rule list answers the default distribution") {
    json doc = json::parse(R"({"vocab_size": 3, "default_dist": {"0": 0.2, "2": 0.8}, "rules": []})");
    TabularOracle oracle(parse_scenario(doc));
    std::vector<Token> visible{ Token{ 1 }, kMask, Token{ 0 } };
    const auto post = oracle.score_block(visible, { 0, 3 }, { { 2, Token{ 0 } } });
    for (const auto & ps : post.positions) {
        REQUIRE(ps.top.size() == 2);
        CHECK(ps.top1() == Candidate{ Token{ 2 }, 0.8 });
    }
    CHECK(*post.at(2).current_p == doctest::Approx(0.2));
    CHECK_FALSE(post.at(1).current_p.has_value());
}

TEST_CASE("first matching rule wins") {
    json doc = json::parse(R"({"vocab_size": 3, "default_dist": {"0": 1.0}, "rules": [
        {"pattern": ["*", "M"], "outputs": {"1": {"1": 1.0}}},
        {"pattern": ["0", "M"], "outputs": {"1": {"2": 1.0}}}
    ]})");
    TabularOracle oracle(parse_scenario(doc));
    std::vector<Token> visible{ Token{ 0 }, kMask };
    CHECK(oracle.matching_rule(visible, { 0, 2 }) == 0u);
    CHECK(oracle.score_block(visible, { 0, 2 }, {}).at(1).top1().token == Token{ 1 });
}

TEST_CASE("signal oracle closed forms") {
    CHECK(logistic(0.0) == 0.5);
    CHECK(logistic(2.0) == doctest::Approx(0.8808).epsilon(1e-4));
    CHECK(logistic(-2.0) == doctest::Approx(0.1192).epsilon(1e-3));

    SignalModelParams p;
    p.reference  = { Token{ 1 }, Token{ 2 }, Token{ 3 }, Token{ 4 } };
    p.distractor = { Token{ 5 }, Token{ 6 }, Token{ 7 }, Token{ 8 } };
    p.alpha0 = 0;
    p.alpha1 = 2;
    p.alpha2 = 2;
    p.vocab_size = 10;
    SignalOracle oracle(p, 7);
    const BlockRange block{ 0, 4 };

    std::vector<Token> all_mask(4, kMask);
    CHECK(oracle.p_true(all_mask, block, 0) == 0.5);

    std::vector<Token> one_aligned{ kMask, Token{ 2 }, kMask, kMask };
    CHECK(oracle.p_true(one_aligned, block, 0) == doctest::Approx(0.8808).epsilon(1e-4));
    std::vector<Token> one_adv{ kMask, Token{ 6 }, kMask, kMask };
    CHECK(oracle.p_true(one_adv, block, 0) == doctest::Approx(0.1192).epsilon(1e-3));

    const auto post = oracle.score_block(one_adv, block, { { 1, Token{ 6 } } });
    CHECK(post.at(0).top1().token == Token{ 5 });  // distractor wins under an adversarial neighbor
    // the distractor itself sees no committed neighbors
    CHECK(*post.at(1).current_p == doctest::Approx(0.5));
    CHECK_NOTHROW(validate_posterior(post, block, { { 1, Token{ 6 } } }, oracle.vocabulary()));

    SignalModelParams zero = p;
    zero.alpha1 = zero.alpha2 = 0;
    SignalOracle flat(zero, 1);
    std::vector<Token> mixed{ Token{ 1 }, Token{ 6 }, Token{ 3 }, kMask };
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(flat.p_true(mixed, block, i) == 0.5);
    }

    SignalModelParams same = p;
    same.distractor[2] = same.reference[2];
    CHECK_THROWS_AS(SignalOracle(same, 0), ValidationError);
}

TEST_CASE("signal oracle hierarchy over random states") {
    Rng rng(99);
    for (int trial = 0; trial < 500; ++trial) {
        SignalModelParams p;
        p.vocab_size  = 16;
        p.alpha0      = rng.uniform() * 2 - 1;
        p.alpha1      = 0.1 + rng.uniform() * 3;
        p.alpha2      = 0.1 + rng.uniform() * 6;
        p.bias_spread = rng.uniform() * 2;
        const std::size_t n = 4 + rng.below(8);
        for (std::size_t i = 0; i < n; ++i) {
            const auto r = static_cast<TokenId>(rng.below(16));
            p.reference.push_back(Token{ r });
            p.distractor.push_back(Token{ (r + 1 + static_cast<TokenId>(rng.below(15))) % 16 });
        }
        SignalOracle oracle(p, rng.next());
        const BlockRange block{ 0, n };

        std::vector<Token> state(n, kMask);
        for (std::size_t i = 0; i < n; ++i) {
            const double u = rng.uniform();
            state[i] = u < 0.3 ? kMask : u < 0.65 ? p.reference[i] : p.distractor[i];
        }
        const std::size_t i = rng.below(n);
        std::size_t       j = rng.below(n);
        if (j == i) {
            j = (j + 1) % n;
        }
        state[j] = kMask;
        const double base = oracle.p_true(state, block, i);
        auto         up   = state;
        up[j]             = p.reference[j];
        auto down         = state;
        down[j]           = p.distractor[j];
        CHECK(oracle.p_true(up, block, i) > base);
        CHECK(base > oracle.p_true(down, block, i));
    }
}

TEST_CASE("signal oracle bias is seeded") {
    SignalModelParams p;
    p.reference   = { Token{ 0 }, Token{ 1 }, Token{ 2 } };
    p.distractor  = { Token{ 1 }, Token{ 2 }, Token{ 0 } };
    p.vocab_size  = 3;
    p.bias_spread = 1.5;
    SignalOracle a(p, 11), b(p, 11), c(p, 12);
    CHECK(a.bias() == b.bias());
    CHECK(a.bias() != c.bias());
    for (double x : a.bias()) {
        CHECK(std::fabs(x) <= 1.5);
    }
}

TEST_CASE("posterior validation catches broken answers") {
    const Vocabulary vocab{ 4, std::nullopt, std::nullopt };
    const BlockRange block{ 2, 4 };
    auto good = posterior(block, { score({ { Token{ 1 }, 0.6 }, { Token{ 2 }, 0.4 } }, 0.4),
                                   score({ { Token{ 3 }, 1.0 } }) });
    const CurrentTokens current{ { 2, Token{ 2 } } };
    CHECK_NOTHROW(validate_posterior(good, block, current, vocab));

    auto wrong_block = good;
    wrong_block.block = { 0, 2 };
    CHECK_THROWS_AS(validate_posterior(wrong_block, block, current, vocab), OracleError);

    auto short_post = good;
    short_post.positions.pop_back();
    CHECK_THROWS_AS(validate_posterior(short_post, block, current, vocab), OracleError);

    auto unknown = good;
    unknown.positions[1].top[0].token = Token{ 9 };
    try {
        validate_posterior(unknown, block, current, vocab);
        FAIL("expected a vocabulary error");
    } catch (const OracleError & e) {
        CHECK(e.kind() == OracleErrorKind::vocab_mismatch);
    }

    auto heavy = good;
    heavy.positions[0].top[1].p = 0.9;
    sort_candidates(heavy.positions[0].top);
    CHECK_THROWS_AS(validate_posterior(heavy, block, current, vocab), OracleError);

    auto no_current = good;
    no_current.positions[0].current_p.reset();
    CHECK_THROWS_AS(validate_posterior(no_current, block, current, vocab), OracleError);

    auto unsorted = good;
    std::swap(unsorted.positions[0].top[0], unsorted.positions[0].top[1]);
    CHECK_THROWS_AS(validate_posterior(unsorted, block, current, vocab), OracleError);
}
