#pragma once

// Provider RPC: line-delimited JSON over a child process's standard streams,
// or HTTP POST to a base URL.
//
//   request : {"id": n, "method": m, "params": {...}}
//   response: {"id": n, "result": ...} | {"id": n, "error": {"code", "message"}}
//
// The first exchange is always {"method": "hello"} -> {"dim": d, "serial": b}.

#include "vforest/provider.hpp"

#include <iosfwd>
#include <memory>
#include <mutex>
#include <string>

namespace vforest::rpc {

inline constexpr int invalid_request = -32600;
inline constexpr int method_not_found = -32601;
inline constexpr int invalid_params = -32602;
inline constexpr int provider_failure = -32000;
// parse_query could not understand the text; surfaces as Error(parse).
inline constexpr int parse_failure = -32001;

class Transport {
public:
    virtual ~Transport() = default;
    // Sends one request line and returns the matching response line.
    virtual std::string exchange(const std::string& request_line) = 0;
};

// Spawns `command` through /bin/sh and talks to it over stdin/stdout.
class SubprocessTransport final : public Transport {
public:
    explicit SubprocessTransport(const std::string& command);
    ~SubprocessTransport() override;
    SubprocessTransport(const SubprocessTransport&) = delete;
    SubprocessTransport& operator=(const SubprocessTransport&) = delete;

    std::string exchange(const std::string& request_line) override;

private:
    int to_child_ = -1;
    int from_child_ = -1;
    int pid_ = -1;
    std::string buffer_;
};

// POSTs each request to base_url, e.g. "http://127.0.0.1:8765/rpc".
class HttpTransport final : public Transport {
public:
    explicit HttpTransport(const std::string& base_url);
    ~HttpTransport() override;

    std::string exchange(const std::string& request_line) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

class RpcProvider final : public Provider {
public:
    explicit RpcProvider(std::unique_ptr<Transport> transport);

    std::size_t dim() const override { return dim_; }
    bool serial() const override { return serial_; }

protected:
    Embedding do_embed_text(std::string_view text) override;
    SegmentEncoding do_encode_segment(const SegmentInput& input) override;
    std::string do_caption(const SegmentInput& input) override;
    nlohmann::json do_parse_query(std::string_view text) override;
    std::string do_synthesize(std::string_view task, std::span<const std::string> evidence) override;

private:
    nlohmann::json call(const std::string& method, nlohmann::json params);

    std::unique_ptr<Transport> transport_;
    std::mutex mutex_;
    long long next_id_ = 0;
    std::size_t dim_ = 0;
    bool serial_ = true;
};

// "mock" is handled by the caller; addresses starting with http:// or
// https:// select HTTP, anything else is a subprocess command line.
std::unique_ptr<Provider> connect(const std::string& address);

// Server side: answers one request with the given provider.  Never throws;
// malformed requests get error responses.
nlohmann::json dispatch(Provider& provider, const nlohmann::json& request);
std::string dispatch_line(Provider& provider, const std::string& request_line);

// Serves requests line by line until EOF.
void serve(Provider& provider, std::istream& in, std::ostream& out);

} // namespace vforest::rpc
