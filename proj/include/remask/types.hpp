#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

namespace remask {

using TokenId = std::int32_t;

// A vocabulary index, or the mask state. The mask is kept outside the
// vocabulary range so that the engine never depends on an oracle's id layout;
// it serializes as null everywhere.
struct Token {
    TokenId id = -1;

    constexpr bool is_mask() const noexcept { return id < 0; }
    friend constexpr auto operator<=>(const Token &, const Token &) = default;
};

inline constexpr Token kMask{-1};

// Oracle-declared vocabulary. The engine never assumes a size.
struct Vocabulary {
    TokenId                size = 0;
    std::optional<TokenId> eos;
    std::optional<TokenId> pad;

    bool contains(Token t) const noexcept { return t.id >= 0 && t.id < size; }
    bool is_eos(Token t) const noexcept { return eos && t.id == *eos; }
};

// Half-open range of absolute positions [start, end).
struct BlockRange {
    std::size_t start = 0;
    std::size_t end   = 0;

    std::size_t size() const noexcept { return end - start; }
    bool contains(std::size_t pos) const noexcept { return pos >= start && pos < end; }
    friend bool operator==(const BlockRange &, const BlockRange &) = default;
};

struct Candidate {
    Token  token;
    double p = 0.0;
    friend bool operator==(const Candidate &, const Candidate &) = default;
};

struct PositionScore {
    std::vector<Candidate> top;        // sorted by p descending
    std::optional<double>  current_p;  // only for committed editable positions

    const Candidate & top1() const { return top.front(); }
    friend bool operator==(const PositionScore &, const PositionScore &) = default;
};

// One oracle answer for the active block.
struct BlockPosterior {
    BlockRange                 block;
    int                        k = 0;
    std::vector<PositionScore> positions;  // positions[i] scores block.start + i

    const PositionScore & at(std::size_t pos) const { return positions.at(pos - block.start); }
    friend bool operator==(const BlockPosterior &, const BlockPosterior &) = default;
};

// Committed editable tokens the oracle must report current_p for.
using CurrentTokens = std::map<std::size_t, Token>;

} // namespace remask
