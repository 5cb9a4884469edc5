#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "remask/config.hpp"
#include "remask/errors.hpp"
#include "remask/state.hpp"
#include "remask/trajectory.hpp"

#include <sstream>

using namespace remask;

TEST_CASE("config defaults and validation") {
    StrategyConfig c;
    CHECK(c.tau_m2t == 0.7);
    CHECK(c.tau_t2t == 0.5);
    CHECK(c.tau_lp == 0.3);
    CHECK(c.c_max == 1);
    CHECK(c.rho_max == 0.25);
    CHECK(c.block_len == 32);
    CHECK(c.inner_iter_limit() == 128);
    CHECK(c.edit_limit() == 4);
    CHECK_NOTHROW(c.validate());

    auto bad = [](auto mutate) {
        StrategyConfig x;
        mutate(x);
        return x;
    };
    CHECK_THROWS_AS(bad([](auto & x) { x.tau_lp = 1.5; }).validate(), ValidationError);
    CHECK_THROWS_AS(bad([](auto & x) { x.rho_max = 0.0; }).validate(), ValidationError);
    CHECK_THROWS_AS(bad([](auto & x) { x.block_len = 0; }).validate(), ValidationError);
    CHECK_THROWS_AS(bad([](auto & x) { x.c_max = -1; }).validate(), ValidationError);
    CHECK_THROWS_AS(bad([](auto & x) { x.n_transfer = 0; }).validate(), ValidationError);
}

TEST_CASE("strategy names round-trip") {
    for (auto k : { StrategyKind::none, StrategyKind::t2t_replace, StrategyKind::t2m_lowprob,
                    StrategyKind::t2m_t2ttrigger, StrategyKind::t2m_logitdiff, StrategyKind::random_remask }) {
        CHECK(parse_strategy(to_string(k)) == k);
    }
    CHECK_FALSE(parse_strategy("bogus").has_value());
    CHECK(is_remask(StrategyKind::t2m_lowprob));
    CHECK_FALSE(is_remask(StrategyKind::t2t_replace));

    StrategyConfig c;
    c.sigma = 0.0;
    CHECK_THROWS_AS(EditingStrategy{ StrategyKind::random_remask }.validate(c), ValidationError);
    c.c_max = 0;
    CHECK_THROWS_AS(EditingStrategy{ StrategyKind::t2m_lowprob }.validate(c), ValidationError);
    CHECK_NOTHROW(EditingStrategy{ StrategyKind::t2t_replace }.validate(c));
}

TEST_CASE("new state lays blocks on the absolute grid") {
    StrategyConfig c;
    c.block_len      = 8;
    c.max_new_tokens = 14;
    std::vector<Token> prompt{ Token{ 1 }, Token{ 2 }, Token{ 3 } };
    auto s = new_generation_state(prompt, c);
    CHECK(s.size() == 17);
    CHECK(s.prompt_len == 3);
    CHECK(s.block == BlockRange{ 0, 8 });
    CHECK(s.block_has_mask());
    CHECK(editable_positions(s).empty());
    CHECK(s.visible().size() == 8);

    s.tokens[4] = Token{ 9 };
    CHECK(editable_positions(s) == std::vector<std::size_t>{ 4 });
    CHECK(current_tokens(s) == CurrentTokens{ { 4, Token{ 9 } } });

    s.remask_counts[4] = 1;
    s.step             = 5;
    REQUIRE(advance_block(s));
    CHECK(s.block == BlockRange{ 8, 16 });
    CHECK(s.block_index == 1);
    CHECK(s.step == 0);
    CHECK(s.remask_counts[4] == 0);
    REQUIRE(advance_block(s));
    CHECK(s.block == BlockRange{ 16, 17 });  // truncated tail block
    CHECK_FALSE(advance_block(s));
    CHECK(s.finished);
}

TEST_CASE("prompt aligned to the grid starts a fresh block") {
    StrategyConfig c;
    c.block_len      = 4;
    c.max_new_tokens = 4;
    std::vector<Token> prompt(4, Token{ 0 });
    auto s = new_generation_state(prompt, c);
    CHECK(s.block == BlockRange{ 4, 8 });
}

TEST_CASE("bad prompts are rejected") {
    StrategyConfig c;
    CHECK_THROWS_AS(new_generation_state(std::vector<Token>{}, c), ValidationError);
    CHECK_THROWS_AS(new_generation_state(std::vector<Token>{ Token{ 1 }, kMask }, c), ValidationError);
}

TEST_CASE("trajectory lines keep field order and write the mask as null") {
    TrajectoryEvent remask{ 1, Phase::remask, 5, Token{ 8 }, kMask, 0.11, std::string("lowprob"), 0 };
    CHECK(to_json_line(remask) ==
          R"({"step":1,"phase":"remask","pos":5,"old":8,"new":null,"prob":0.11,"detector":"lowprob","block_index":0})");
    TrajectoryEvent fill{ 2, Phase::fill, 5, kMask, Token{ 8 }, 0.94, std::nullopt, 0 };
    CHECK(to_json_line(fill) ==
          R"({"step":2,"phase":"fill","pos":5,"old":null,"new":8,"prob":0.94,"detector":null,"block_index":0})");

    CHECK(event_from_json_line(to_json_line(remask)) == remask);
    CHECK(event_from_json_line(to_json_line(fill)) == fill);
    CHECK(remask.well_formed());
    CHECK(fill.well_formed());
    TrajectoryEvent odd{ 0, Phase::edit, 1, Token{ 3 }, Token{ 3 }, 0.9, std::nullopt, 0 };
    CHECK_FALSE(odd.well_formed());
}

TEST_CASE("jsonl round trip") {
    Trajectory t;
    t.prompt_len = 2;
    t.events     = {
        { 0, Phase::fill, 2, kMask, Token{ 10 }, 0.95, std::nullopt, 0 },
        { 1, Phase::edit, 2, Token{ 10 }, Token{ 11 }, 0.64, std::nullopt, 0 },
        { 0, Phase::fill, 9, kMask, Token{ 3 }, 0.5, std::nullopt, 1 },
    };
    const std::string text = to_jsonl(t);
    std::istringstream in(text);
    const Trajectory   back = read_jsonl(in, 2);
    CHECK(back.events == t.events);
    CHECK(back.block_count() == 2);
    CHECK(to_jsonl(back) == text);

    std::istringstream junk("{\"step\":0}\n");
    CHECK_THROWS_AS(read_jsonl(junk, 0), ValidationError);
}
