#pragma once

#include "remask/oracle.hpp"

#include <json.hpp>

#include <chrono>
#include <memory>
#include <mutex>
#include <string>

namespace httplib {
class Client;
}

namespace remask {

// Wire protocol of the scoring service.
//
//   POST /v1/score  {"tokens":[id|null,...], "block":[start,end], "current":{"pos":id}, "k":k}
//                -> {"positions":[{"pos":p, "top":[{"id":id,"p":prob}], "current_p":prob|null}]}
//   GET  /v1/meta -> {"vocab_size":n, "mask_id":id, "eos_id":id|null, "mode":"spec"|"model"}
namespace wire {

struct ScoreRequest {
    std::vector<Token> tokens;  // length == block.end, mask as null
    BlockRange         block;
    CurrentTokens      current;
    int                k = 8;
};

struct Meta {
    TokenId                vocab_size = 0;
    std::optional<TokenId> mask_id;
    std::optional<TokenId> eos_id;
    std::string            mode;
};

nlohmann::json encode_request(const ScoreRequest & req);
// Throws ValidationError on a request that breaks the causality contract or
// is otherwise malformed.
ScoreRequest decode_request(const nlohmann::json & j);

nlohmann::json encode_response(const BlockPosterior & posterior);
// Throws OracleError(malformed_response) on schema errors.
BlockPosterior decode_response(const nlohmann::json & j, BlockRange block, int k);

nlohmann::json encode_meta(const Meta & meta);
Meta           decode_meta(const nlohmann::json & j);

} // namespace wire

// Client for a remote scoring service. Vocabulary metadata is fetched once at
// construction; calls are serialized over a single connection.
class RemoteOracle final : public Oracle {
public:
    // `base_url` like "http://127.0.0.1:8080". Throws OracleError(transport)
    // when the service is unreachable.
    explicit RemoteOracle(const std::string & base_url, int k = 8,
                          std::chrono::milliseconds timeout = std::chrono::seconds(30));
    ~RemoteOracle() override;

    Vocabulary vocabulary() const override;
    BlockPosterior score_block(std::span<const Token> visible,
                               BlockRange             block,
                               const CurrentTokens &  current) const override;

    const wire::Meta & meta() const noexcept { return meta_; }

private:
    std::unique_ptr<httplib::Client> client_;
    mutable std::mutex               mutex_;
    int                              k_;
    wire::Meta                       meta_;
};

// Oracle URL from REMASK_ORACLE_URL, if set and non-empty.
std::optional<std::string> oracle_url_from_env();

} // namespace remask
