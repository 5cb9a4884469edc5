#pragma once

// Test-only oracles and checkers. Nothing here calls into the engine's
// detectors or caps; the checker recomputes everything from the log.

#include "remask/oracle.hpp"
#include "remask/rng.hpp"
#include "remask/state.hpp"
#include "remask/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#ifndef REMASK_FIXTURE_DIR
#define REMASK_FIXTURE_DIR "fixtures"
#endif

namespace testing {

using namespace remask;

inline std::string fixture(const std::string & name) {
    return std::string(REMASK_FIXTURE_DIR) + "/" + name;
}

inline PositionScore score(std::vector<Candidate> top, std::optional<double> current_p = std::nullopt) {
    sort_candidates(top);
    return { std::move(top), current_p };
}

inline BlockPosterior posterior(BlockRange block, std::vector<PositionScore> positions, int k = 8) {
    return { block, k, std::move(positions) };
}

// A state with `prompt` frozen tokens followed by `block` worth of slots, the
// active block being the first one holding response positions.
inline GenerationState state_with(std::vector<Token> tokens, std::size_t prompt_len, std::size_t block_len) {
    GenerationState s;
    s.tokens     = std::move(tokens);
    s.prompt_len = prompt_len;
    s.block_len  = block_len;
    s.block_index = prompt_len / block_len;
    s.block      = { s.block_index * block_len, std::min((s.block_index + 1) * block_len, s.tokens.size()) };
    s.remask_counts.assign(s.tokens.size(), 0);
    s.edit_counts.assign(s.tokens.size(), 0);
    s.prev_prob.assign(s.tokens.size(), std::nullopt);
    return s;
}

inline std::uint64_t fnv1a(std::uint64_t h, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xff;
        h *= 0x100000001b3ull;
    }
    return h;
}

// Posterior drawn from a hash of (seed, visible block, position): a pure
// function of the state, so reruns are deterministic while different states
// get unrelated answers. Mass is spread over k random tokens with a random
// peak, so every threshold gets exercised.
class RandomOracle final : public Oracle {
public:
    RandomOracle(TokenId vocab, int k, std::uint64_t seed, std::optional<TokenId> eos = std::nullopt)
        : vocab_(vocab), k_(k), seed_(seed), eos_(eos) {}

    Vocabulary vocabulary() const override { return { vocab_, eos_, std::nullopt }; }

    BlockPosterior score_block(std::span<const Token> visible, BlockRange block,
                               const CurrentTokens & current) const override {
        std::uint64_t h = fnv1a(0xcbf29ce484222325ull, seed_);
        for (std::size_t i = block.start; i < block.end; ++i) {
            h = fnv1a(h, static_cast<std::uint64_t>(visible[i].id + 2));
        }
        BlockPosterior out{ block, k_, {} };
        for (std::size_t pos = block.start; pos < block.end; ++pos) {
            Rng                    rng(fnv1a(h, pos));
            std::map<TokenId, double> dist;
            const double           peak = rng.uniform();
            double                 left = 1.0;
            for (int j = 0; j < k_ && left > 1e-12; ++j) {
                const auto t = static_cast<TokenId>(rng.below(static_cast<std::uint64_t>(vocab_)));
                const double p = (j == 0 ? peak : rng.uniform()) * left;
                dist[t] += p;
                left -= p;
            }
            PositionScore ps;
            for (const auto & [t, p] : dist) {
                ps.top.push_back({ Token{ t }, p });
            }
            sort_candidates(ps.top);
            if (ps.top.size() > static_cast<std::size_t>(k_)) {
                ps.top.resize(static_cast<std::size_t>(k_));
            }
            if (auto it = current.find(pos); it != current.end()) {
                auto d = dist.find(it->second.id);
                ps.current_p = d == dist.end() ? 0.0 : d->second;
            }
            out.positions.push_back(std::move(ps));
        }
        return out;
    }

private:
    TokenId                vocab_;
    int                    k_;
    std::uint64_t          seed_;
    std::optional<TokenId> eos_;
};

struct CapViolation {
    std::size_t block_index;
    int         step;
    std::string what;
};

// Replays a trajectory from the prompt and checks, per (block, step), that the
// remask count stays within floor(rho_max * |E|) with |E| the committed
// response positions of the block when the step queried the oracle, and that
// no position is remasked more than c_max times in one block. Also checks the
// log is self-consistent (old tokens match the replayed state).
inline std::vector<CapViolation> check_caps(const Trajectory & t, std::size_t total_len, std::size_t block_len,
                                            int c_max, double rho_max) {
    std::vector<CapViolation> out;
    std::vector<Token>        tokens(total_len, kMask);
    for (std::size_t i = 0; i < t.prompt_len && i < total_len; ++i) {
        tokens[i] = Token{ 0 };  // prompt content is irrelevant, only "not masked"
    }
    std::map<std::pair<std::size_t, int>, std::vector<const TrajectoryEvent *>> steps;
    for (const auto & e : t.events) {
        steps[{ e.block_index, e.step }].push_back(&e);
    }
    std::map<std::pair<std::size_t, std::size_t>, int> remasks_in_block;
    for (const auto & [key, events] : steps) {
        const auto [bi, step] = key;
        const std::size_t start = bi * block_len;
        const std::size_t end   = std::min(start + block_len, total_len);
        std::size_t       editable = 0;
        for (std::size_t i = std::max(start, t.prompt_len); i < end; ++i) {
            editable += tokens[i].is_mask() ? 0 : 1;
        }
        const auto cap     = static_cast<std::size_t>(std::floor(rho_max * static_cast<double>(editable)));
        std::size_t remask = 0;
        for (const auto * e : events) {
            if (e->pos < start || e->pos >= end || e->pos < t.prompt_len) {
                out.push_back({ bi, step, "event outside the editable block at " + std::to_string(e->pos) });
                continue;
            }
            if (tokens[e->pos] != e->old_token) {
                out.push_back({ bi, step, "old token mismatch at " + std::to_string(e->pos) });
            }
            tokens[e->pos] = e->new_token;
            if (e->phase == Phase::remask) {
                ++remask;
                if (++remasks_in_block[{ bi, e->pos }] > c_max) {
                    out.push_back({ bi, step, "c_max exceeded at " + std::to_string(e->pos) });
                }
            }
        }
        if (remask > cap) {
            out.push_back({ bi, step,
                            std::to_string(remask) + " remasks > cap " + std::to_string(cap) + " (|E|=" +
                                std::to_string(editable) + ")" });
        }
    }
    return out;
}

} // namespace testing
