#include "remask/oracle.hpp"

#include "remask/errors.hpp"

#include <algorithm>
#include <string>

namespace remask {

namespace {

constexpr double kMassSlack = 1e-9;

[[noreturn]] void malformed(const std::string & what) {
    throw OracleError(OracleErrorKind::malformed_response, what);
}

} // namespace

void sort_candidates(std::vector<Candidate> & candidates) {
    std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate & a, const Candidate & b) {
        if (a.p != b.p) {
            return a.p > b.p;
        }
        return a.token.id < b.token.id;
    });
}

void validate_posterior(const BlockPosterior & posterior,
                        BlockRange             block,
                        const CurrentTokens &  current,
                        const Vocabulary &     vocab) {
    if (posterior.block != block) {
        malformed("posterior block range does not match the request");
    }
    if (posterior.positions.size() != block.size()) {
        malformed("posterior must score every block position");
    }
    for (std::size_t i = 0; i < posterior.positions.size(); ++i) {
        const auto & ps  = posterior.positions[i];
        const auto   pos = block.start + i;
        if (ps.top.empty()) {
            malformed("empty candidate list at position " + std::to_string(pos));
        }
        if (posterior.k > 0 && ps.top.size() > static_cast<std::size_t>(posterior.k)) {
            malformed("more than k candidates at position " + std::to_string(pos));
        }
        double mass = 0.0;
        for (std::size_t c = 0; c < ps.top.size(); ++c) {
            const auto & cand = ps.top[c];
            if (!vocab.contains(cand.token)) {
                throw OracleError(OracleErrorKind::vocab_mismatch,
                                  "token " + std::to_string(cand.token.id) + " outside the declared vocabulary");
            }
            if (!(cand.p >= 0.0 && cand.p <= 1.0)) {
                malformed("probability outside [0, 1] at position " + std::to_string(pos));
            }
            if (c > 0 && ps.top[c - 1].p < cand.p) {
                malformed("candidates not sorted at position " + std::to_string(pos));
            }
            mass += cand.p;
        }
        if (mass > 1.0 + kMassSlack) {
            malformed("candidate mass exceeds 1 at position " + std::to_string(pos));
        }
        if (ps.current_p && !(*ps.current_p >= 0.0 && *ps.current_p <= 1.0)) {
            malformed("current_p outside [0, 1] at position " + std::to_string(pos));
        }
    }
    for (const auto & [pos, tok] : current) {
        if (!block.contains(pos)) {
            throw ContractViolation("current token outside the active block");
        }
        if (!posterior.positions[pos - block.start].current_p) {
            malformed("missing current_p for committed position " + std::to_string(pos));
        }
    }
}

} // namespace remask
