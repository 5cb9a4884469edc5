#pragma once

#include "remask/types.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace remask {

enum class Phase { fill, edit, remask };

std::string_view      to_string(Phase phase) noexcept;
std::optional<Phase>  parse_phase(std::string_view name) noexcept;

// A single fill, replacement or remask. Also used as the engine's decision
// type before the step and block index are stamped on.
struct TrajectoryEvent {
    int                        step = 0;
    Phase                      phase = Phase::fill;
    std::size_t                pos = 0;
    Token                      old_token;
    Token                      new_token;
    double                     prob = 0.0;
    std::optional<std::string> detector;
    std::size_t                block_index = 0;

    // fill: mask -> token; remask: token -> mask; edit: token -> other token.
    bool well_formed() const noexcept;

    friend bool operator==(const TrajectoryEvent &, const TrajectoryEvent &) = default;
};

using EditDecision = TrajectoryEvent;

struct Trajectory {
    std::size_t                  prompt_len = 0;
    std::vector<TrajectoryEvent> events;

    std::size_t block_count() const noexcept;
};

// JSON-lines with fields step, phase, pos, old, new, prob, detector,
// block_index in that order; the mask is null.
std::string     to_json_line(const TrajectoryEvent & event);
TrajectoryEvent event_from_json_line(std::string_view line);

void       write_jsonl(std::ostream & out, const Trajectory & trajectory);
std::string to_jsonl(const Trajectory & trajectory);
Trajectory read_jsonl(std::istream & in, std::size_t prompt_len);

} // namespace remask
