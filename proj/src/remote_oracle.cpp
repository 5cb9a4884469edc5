#include "remask/remote_oracle.hpp"

#include "remask/errors.hpp"

#include <httplib.h>

#include <cstdlib>

namespace remask {

using nlohmann::json;

namespace wire {

json encode_request(const ScoreRequest & req) {
    json tokens = json::array();
    for (Token t : req.tokens) {
        tokens.push_back(t.is_mask() ? json(nullptr) : json(t.id));
    }
    json current = json::object();
    for (const auto & [pos, tok] : req.current) {
        current[std::to_string(pos)] = tok.id;
    }
    return json{
        { "tokens", std::move(tokens) },
        { "block", json::array({ req.block.start, req.block.end }) },
        { "current", std::move(current) },
        { "k", req.k },
    };
}

ScoreRequest decode_request(const json & j) {
    try {
        ScoreRequest req;
        for (const auto & t : j.at("tokens")) {
            req.tokens.push_back(t.is_null() ? kMask : Token{ t.get<TokenId>() });
        }
        const auto block = j.at("block").get<std::vector<std::size_t>>();
        if (block.size() != 2 || block[0] >= block[1]) {
            throw ValidationError("block must be [start, end) with start < end");
        }
        req.block = { block[0], block[1] };
        if (req.tokens.size() != req.block.end) {
            throw ValidationError("tokens must end exactly at the block boundary");
        }
        for (const auto & [key, id] : j.at("current").items()) {
            const std::size_t pos = std::stoul(key);
            if (!req.block.contains(pos)) {
                throw ValidationError("current position " + key + " outside the block");
            }
            req.current.emplace(pos, Token{ id.get<TokenId>() });
        }
        req.k = j.value("k", 8);
        if (req.k < 1) {
            throw ValidationError("k must be positive");
        }
        return req;
    } catch (const ValidationError &) {
        throw;
    } catch (const json::exception & ex) {
        throw ValidationError(std::string("malformed score request: ") + ex.what());
    } catch (const std::logic_error & ex) {
        throw ValidationError(std::string("malformed score request: ") + ex.what());
    }
}

json encode_response(const BlockPosterior & posterior) {
    json positions = json::array();
    for (std::size_t i = 0; i < posterior.positions.size(); ++i) {
        const auto & ps  = posterior.positions[i];
        json         top = json::array();
        for (const auto & c : ps.top) {
            top.push_back({ { "id", c.token.id }, { "p", c.p } });
        }
        positions.push_back({
            { "pos", posterior.block.start + i },
            { "top", std::move(top) },
            { "current_p", ps.current_p ? json(*ps.current_p) : json(nullptr) },
        });
    }
    return json{ { "positions", std::move(positions) } };
}

BlockPosterior decode_response(const json & j, BlockRange block, int k) {
    try {
        BlockPosterior out;
        out.block = block;
        out.k     = k;
        out.positions.resize(block.size());
        std::vector<bool> seen(block.size(), false);
        for (const auto & entry : j.at("positions")) {
            const auto pos = entry.at("pos").get<std::size_t>();
            if (!block.contains(pos) || seen[pos - block.start]) {
                throw OracleError(OracleErrorKind::malformed_response,
                                  "unexpected position " + std::to_string(pos) + " in response");
            }
            seen[pos - block.start] = true;
            auto & ps               = out.positions[pos - block.start];
            for (const auto & c : entry.at("top")) {
                ps.top.push_back({ Token{ c.at("id").get<TokenId>() }, c.at("p").get<double>() });
            }
            const auto & cp = entry.at("current_p");
            if (!cp.is_null()) {
                ps.current_p = cp.get<double>();
            }
        }
        for (bool s : seen) {
            if (!s) {
                throw OracleError(OracleErrorKind::malformed_response, "response does not cover the block");
            }
        }
        return out;
    } catch (const json::exception & ex) {
        throw OracleError(OracleErrorKind::malformed_response, std::string("malformed score response: ") + ex.what());
    }
}

json encode_meta(const Meta & meta) {
    return json{
        { "vocab_size", meta.vocab_size },
        { "mask_id", meta.mask_id ? json(*meta.mask_id) : json(nullptr) },
        { "eos_id", meta.eos_id ? json(*meta.eos_id) : json(nullptr) },
        { "mode", meta.mode },
    };
}

Meta decode_meta(const json & j) {
    try {
        Meta m;
        m.vocab_size = j.at("vocab_size").get<TokenId>();
        if (j.contains("mask_id") && !j.at("mask_id").is_null()) {
            m.mask_id = j.at("mask_id").get<TokenId>();
        }
        if (j.contains("eos_id") && !j.at("eos_id").is_null()) {
            m.eos_id = j.at("eos_id").get<TokenId>();
        }
        m.mode = j.value("mode", std::string("spec"));
        return m;
    } catch (const json::exception & ex) {
        throw OracleError(OracleErrorKind::malformed_response, std::string("malformed meta response: ") + ex.what());
    }
}

} // namespace wire

RemoteOracle::RemoteOracle(const std::string & base_url, int k, std::chrono::milliseconds timeout)
    : client_(std::make_unique<httplib::Client>(base_url)), k_(k) {
    if (!client_->is_valid()) {
        throw OracleError(OracleErrorKind::transport, "invalid oracle url " + base_url);
    }
    client_->set_connection_timeout(timeout);
    client_->set_read_timeout(timeout);
    client_->set_keep_alive(true);

    auto res = client_->Get("/v1/meta");
    if (!res) {
        throw OracleError(OracleErrorKind::transport,
                          "GET /v1/meta failed: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw OracleError(OracleErrorKind::transport, "GET /v1/meta returned status " + std::to_string(res->status));
    }
    try {
        meta_ = wire::decode_meta(json::parse(res->body));
    } catch (const json::parse_error & ex) {
        throw OracleError(OracleErrorKind::malformed_response, std::string("meta is not JSON: ") + ex.what());
    }
    if (meta_.vocab_size < 1) {
        throw OracleError(OracleErrorKind::vocab_mismatch, "remote oracle declared an empty vocabulary");
    }
}

RemoteOracle::~RemoteOracle() = default;

Vocabulary RemoteOracle::vocabulary() const {
    return { meta_.vocab_size, meta_.eos_id, std::nullopt };
}

BlockPosterior RemoteOracle::score_block(std::span<const Token> visible,
                                         BlockRange             block,
                                         const CurrentTokens &  current) const {
    if (visible.size() != block.end) {
        throw ContractViolation("visible prefix must end at the block boundary");
    }
    wire::ScoreRequest req{ { visible.begin(), visible.end() }, block, current, k_ };
    const std::string  body = wire::encode_request(req).dump();

    httplib::Result res = [&] {
        std::lock_guard lock(mutex_);
        return client_->Post("/v1/score", body, "application/json");
    }();
    if (!res) {
        throw OracleError(OracleErrorKind::transport, "POST /v1/score failed: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw OracleError(OracleErrorKind::transport,
                          "POST /v1/score returned status " + std::to_string(res->status) + ": " + res->body);
    }
    json doc;
    try {
        doc = json::parse(res->body);
    } catch (const json::parse_error & ex) {
        throw OracleError(OracleErrorKind::malformed_response, std::string("score response is not JSON: ") + ex.what());
    }
    return wire::decode_response(doc, block, k_);
}

std::optional<std::string> oracle_url_from_env() {
    const char * v = std::getenv("REMASK_ORACLE_URL");
    if (v == nullptr || *v == '\0') {
        return std::nullopt;
    }
    return std::string(v);
}

} // namespace remask
