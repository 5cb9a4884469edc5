#include "remask/trajectory.hpp"

#include "remask/errors.hpp"

#include <json.hpp>

#include <istream>
#include <ostream>
#include <sstream>

namespace remask {

using ordered_json = nlohmann::ordered_json;

std::string_view to_string(Phase phase) noexcept {
    switch (phase) {
        case Phase::fill:   return "fill";
        case Phase::edit:   return "edit";
        case Phase::remask: return "remask";
    }
    return "unknown";
}

std::optional<Phase> parse_phase(std::string_view name) noexcept {
    if (name == "fill") return Phase::fill;
    if (name == "edit") return Phase::edit;
    if (name == "remask") return Phase::remask;
    return std::nullopt;
}

bool TrajectoryEvent::well_formed() const noexcept {
    switch (phase) {
        case Phase::fill:   return old_token.is_mask() && !new_token.is_mask();
        case Phase::remask: return new_token.is_mask() && !old_token.is_mask();
        case Phase::edit:   return !old_token.is_mask() && !new_token.is_mask() && old_token != new_token;
    }
    return false;
}

std::size_t Trajectory::block_count() const noexcept {
    if (events.empty()) {
        return 0;
    }
    std::size_t lo = events.front().block_index;
    std::size_t hi = lo;
    for (const auto & e : events) {
        lo = std::min(lo, e.block_index);
        hi = std::max(hi, e.block_index);
    }
    return hi - lo + 1;
}

namespace {

ordered_json token_json(Token t) {
    return t.is_mask() ? ordered_json(nullptr) : ordered_json(t.id);
}

Token token_from_json(const nlohmann::json & j) {
    return j.is_null() ? kMask : Token{ j.get<TokenId>() };
}

} // namespace

std::string to_json_line(const TrajectoryEvent & e) {
    ordered_json j;
    j["step"]        = e.step;
    j["phase"]       = to_string(e.phase);
    j["pos"]         = e.pos;
    j["old"]         = token_json(e.old_token);
    j["new"]         = token_json(e.new_token);
    j["prob"]        = e.prob;
    j["detector"]    = e.detector ? ordered_json(*e.detector) : ordered_json(nullptr);
    j["block_index"] = e.block_index;
    return j.dump();
}

TrajectoryEvent event_from_json_line(std::string_view line) {
    try {
        const auto      j = nlohmann::json::parse(line);
        TrajectoryEvent e;
        e.step  = j.at("step").get<int>();
        auto ph = parse_phase(j.at("phase").get<std::string>());
        if (!ph) {
            throw ValidationError("unknown phase in trajectory line");
        }
        e.phase       = *ph;
        e.pos         = j.at("pos").get<std::size_t>();
        e.old_token   = token_from_json(j.at("old"));
        e.new_token   = token_from_json(j.at("new"));
        e.prob        = j.at("prob").get<double>();
        e.block_index = j.at("block_index").get<std::size_t>();
        if (!j.at("detector").is_null()) {
            e.detector = j.at("detector").get<std::string>();
        }
        return e;
    } catch (const nlohmann::json::exception & ex) {
        throw ValidationError(std::string("bad trajectory line: ") + ex.what());
    }
}

void write_jsonl(std::ostream & out, const Trajectory & trajectory) {
    for (const auto & e : trajectory.events) {
        out << to_json_line(e) << '\n';
    }
}

std::string to_jsonl(const Trajectory & trajectory) {
    std::ostringstream ss;
    write_jsonl(ss, trajectory);
    return ss.str();
}

Trajectory read_jsonl(std::istream & in, std::size_t prompt_len) {
    Trajectory  t;
    t.prompt_len = prompt_len;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        t.events.push_back(event_from_json_line(line));
    }
    return t;
}

} // namespace remask
