#include "vforest/rpc.hpp"

#include "vforest/error.hpp"

#include <httplib.h>

#include <csignal>
#include <istream>
#include <ostream>

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

namespace vforest::rpc {

using nlohmann::json;

namespace {

json detections_json(std::span<const PersonDetection> dets) {
    json arr = json::array();
    for (const auto& d : dets) {
        arr.push_back({{"idx", d.frame_index}, {"x", d.position.x}, {"y", d.position.y}, {"id", d.identity}});
    }
    return arr;
}

json segment_params(const SegmentInput& in) {
    return {{"video_id", in.segment.video_id},
            {"start", in.segment.start_index},
            {"end", in.segment.end_index},
            {"keyframe", in.segment.keyframe_index},
            {"keyframe_embedding", std::vector<double>(in.keyframe_embedding.begin(), in.keyframe_embedding.end())},
            {"detections", detections_json(in.detections)}};
}

Embedding embedding_from(const json& v, const char* what, std::size_t dim) {
    if (!v.is_array()) {
        throw ProviderError(invalid_params, std::string(what) + " is not an array");
    }
    Embedding out;
    out.reserve(v.size());
    for (const auto& x : v) {
        if (!x.is_number()) {
            throw ProviderError(invalid_params, std::string(what) + " contains a non-number");
        }
        out.push_back(x.get<double>());
    }
    if (out.size() != dim) {
        throw ProviderError(invalid_params, std::string(what) + " has dimension " + std::to_string(out.size()) +
                                                ", expected " + std::to_string(dim));
    }
    return out;
}

void write_all(int fd, const std::string& data) {
    std::size_t off = 0;
    while (off < data.size()) {
        ssize_t n = ::write(fd, data.data() + off, data.size() - off);
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw ProviderError(provider_failure, "provider process closed its input");
        }
        off += static_cast<std::size_t>(n);
    }
}

} // namespace

SubprocessTransport::SubprocessTransport(const std::string& command) {
    std::signal(SIGPIPE, SIG_IGN);
    int in_pipe[2];
    int out_pipe[2];
    if (::pipe(in_pipe) != 0) {
        throw Error(ErrorCode::io, "pipe() failed");
    }
    if (::pipe(out_pipe) != 0) {
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        throw Error(ErrorCode::io, "pipe() failed");
    }
    pid_t pid = ::fork();
    if (pid < 0) {
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) {
            ::close(fd);
        }
        throw Error(ErrorCode::io, "fork() failed");
    }
    if (pid == 0) {
        ::dup2(in_pipe[0], STDIN_FILENO);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) {
            ::close(fd);
        }
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    ::fcntl(in_pipe[1], F_SETFD, FD_CLOEXEC);
    ::fcntl(out_pipe[0], F_SETFD, FD_CLOEXEC);
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    pid_ = pid;
}

SubprocessTransport::~SubprocessTransport() {
    if (to_child_ >= 0) {
        ::close(to_child_);
    }
    if (from_child_ >= 0) {
        ::close(from_child_);
    }
    if (pid_ > 0) {
        int status = 0;
        ::waitpid(pid_, &status, 0);
    }
}

std::string SubprocessTransport::exchange(const std::string& request_line) {
    write_all(to_child_, request_line + "\n");
    for (;;) {
        auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return line;
        }
        char chunk[4096];
        ssize_t n = ::read(from_child_, chunk, sizeof chunk);
        if (n < 0 && errno == EINTR) {
            continue;
        }
        if (n <= 0) {
            throw ProviderError(provider_failure, "provider process exited before responding");
        }
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

struct HttpTransport::Impl {
    std::unique_ptr<httplib::Client> client;
    std::string path;
};

HttpTransport::HttpTransport(const std::string& base_url) : impl_(std::make_unique<Impl>()) {
    auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error(ErrorCode::invalid_argument, "provider URL needs a scheme: " + base_url);
    }
    auto path_start = base_url.find('/', scheme_end + 3);
    std::string origin = path_start == std::string::npos ? base_url : base_url.substr(0, path_start);
    impl_->path = path_start == std::string::npos ? "/" : base_url.substr(path_start);
    impl_->client = std::make_unique<httplib::Client>(origin);
    impl_->client->set_connection_timeout(5);
    impl_->client->set_read_timeout(60);
}

HttpTransport::~HttpTransport() = default;

std::string HttpTransport::exchange(const std::string& request_line) {
    auto res = impl_->client->Post(impl_->path, request_line, "application/json");
    if (!res) {
        throw ProviderError(provider_failure, "HTTP provider unreachable: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw ProviderError(provider_failure, "HTTP provider returned status " + std::to_string(res->status));
    }
    return res->body;
}

RpcProvider::RpcProvider(std::unique_ptr<Transport> transport) : transport_(std::move(transport)) {
    json hello = call("hello", json::object());
    if (!hello.is_object() || !hello.contains("dim") || !hello["dim"].is_number_unsigned() ||
        hello["dim"].get<std::size_t>() == 0) {
        throw ProviderError(invalid_params, "handshake did not report a positive dim");
    }
    dim_ = hello["dim"].get<std::size_t>();
    serial_ = hello.value("serial", true);
}

json RpcProvider::call(const std::string& method, json params) {
    std::lock_guard lock(mutex_);
    long long id = next_id_++;
    json request = {{"id", id}, {"method", method}, {"params", std::move(params)}};
    std::string line = transport_->exchange(request.dump());
    json response;
    try {
        response = json::parse(line);
    } catch (const json::parse_error&) {
        throw ProviderError(invalid_request, method + ": provider sent malformed JSON");
    }
    if (!response.is_object() || !response.contains("id") || response["id"] != id) {
        throw ProviderError(invalid_request, method + ": response id does not match request");
    }
    if (auto it = response.find("error"); it != response.end()) {
        int code = it->value("code", provider_failure);
        if (code == parse_failure) {
            throw Error(ErrorCode::parse, it->value("message", std::string("query not understood")));
        }
        throw ProviderError(code, method + ": " + it->value("message", std::string("provider error")));
    }
    auto it = response.find("result");
    if (it == response.end()) {
        throw ProviderError(invalid_request, method + ": response has neither result nor error");
    }
    return *it;
}

Embedding RpcProvider::do_embed_text(std::string_view text) {
    json r = call("embed_text", {{"text", text}});
    return embedding_from(r.value("embedding", json()), "embedding", dim_);
}

SegmentEncoding RpcProvider::do_encode_segment(const SegmentInput& input) {
    json r = call("encode_segment", segment_params(input));
    SegmentEncoding enc;
    enc.segment = input.segment;
    enc.content = embedding_from(r.value("content", json()), "content", dim_);
    if (auto it = r.find("summary_text"); it != r.end() && it->is_string()) {
        enc.summary_text = it->get<std::string>();
    }
    return enc;
}

std::string RpcProvider::do_caption(const SegmentInput& input) {
    json r = call("caption", segment_params(input));
    if (!r.contains("text") || !r["text"].is_string()) {
        throw ProviderError(invalid_params, "caption: missing text");
    }
    return r["text"].get<std::string>();
}

json RpcProvider::do_parse_query(std::string_view text) {
    json r = call("parse_query", {{"text", text}});
    if (!r.contains("query") || !r["query"].is_object()) {
        throw ProviderError(invalid_params, "parse_query: missing query object");
    }
    return r["query"];
}

std::string RpcProvider::do_synthesize(std::string_view task, std::span<const std::string> evidence) {
    json r = call("synthesize", {{"task", task}, {"evidence", std::vector<std::string>(evidence.begin(), evidence.end())}});
    if (!r.contains("text") || !r["text"].is_string()) {
        throw ProviderError(invalid_params, "synthesize: missing text");
    }
    return r["text"].get<std::string>();
}

std::unique_ptr<Provider> connect(const std::string& address) {
    if (address.rfind("http://", 0) == 0 || address.rfind("https://", 0) == 0) {
        return std::make_unique<RpcProvider>(std::make_unique<HttpTransport>(address));
    }
    return std::make_unique<RpcProvider>(std::make_unique<SubprocessTransport>(address));
}

namespace {

json error_response(const json& id, int code, const std::string& message) {
    return {{"id", id}, {"error", {{"code", code}, {"message", message}}}};
}

struct SegmentRequest {
    Segment segment;
    Embedding keyframe;
    std::vector<PersonDetection> detections;
};

SegmentRequest segment_request(const json& p) {
    SegmentRequest r;
    r.segment.video_id = p.at("video_id").get<std::string>();
    r.segment.start_index = p.at("start").get<std::size_t>();
    r.segment.end_index = p.at("end").get<std::size_t>();
    r.segment.keyframe_index = p.value("keyframe", (r.segment.start_index + r.segment.end_index) / 2);
    r.keyframe = p.at("keyframe_embedding").get<Embedding>();
    for (const auto& d : p.at("detections")) {
        PersonDetection det;
        det.video_id = r.segment.video_id;
        det.frame_index = d.at("idx").get<std::size_t>();
        det.position = {d.at("x").get<double>(), d.at("y").get<double>()};
        det.identity = d.at("id").get<std::string>();
        r.detections.push_back(std::move(det));
    }
    return r;
}

} // namespace

json dispatch(Provider& provider, const json& request) {
    json id = request.is_object() && request.contains("id") ? request["id"] : json();
    if (!request.is_object() || !request.contains("method") || !request["method"].is_string()) {
        return error_response(id, invalid_request, "request must be an object with a string method");
    }
    const std::string method = request["method"].get<std::string>();
    const json params = request.value("params", json::object());
    try {
        if (method == "hello") {
            return {{"id", id}, {"result", {{"dim", provider.dim()}, {"serial", provider.serial()}}}};
        }
        if (method == "embed_text") {
            return {{"id", id}, {"result", {{"embedding", provider.embed_text(params.at("text").get<std::string>())}}}};
        }
        if (method == "encode_segment" || method == "caption") {
            SegmentRequest r = segment_request(params);
            SegmentInput input{r.segment, r.keyframe, r.detections};
            if (method == "caption") {
                return {{"id", id}, {"result", {{"text", provider.caption(input)}}}};
            }
            SegmentEncoding enc = provider.encode_segment(input);
            json summary = enc.summary_text ? json(*enc.summary_text) : json();
            return {{"id", id}, {"result", {{"content", enc.content}, {"summary_text", summary}}}};
        }
        if (method == "parse_query") {
            return {{"id", id}, {"result", {{"query", provider.parse_query(params.at("text").get<std::string>())}}}};
        }
        if (method == "synthesize") {
            auto evidence = params.at("evidence").get<std::vector<std::string>>();
            return {{"id", id},
                    {"result", {{"text", provider.synthesize(params.at("task").get<std::string>(), evidence)}}}};
        }
        return error_response(id, method_not_found, "unknown method \"" + method + "\"");
    } catch (const json::exception& e) {
        return error_response(id, invalid_params, e.what());
    } catch (const Error& e) {
        return error_response(id, e.code() == ErrorCode::parse ? parse_failure : provider_failure, e.what());
    } catch (const std::exception& e) {
        return error_response(id, provider_failure, e.what());
    }
}

std::string dispatch_line(Provider& provider, const std::string& request_line) {
    json request;
    try {
        request = json::parse(request_line);
    } catch (const json::parse_error& e) {
        return error_response(json(), invalid_request, std::string("malformed JSON: ") + e.what()).dump();
    }
    return dispatch(provider, request).dump();
}

void serve(Provider& provider, std::istream& in, std::ostream& out) {
    for (std::string line; std::getline(in, line);) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        out << dispatch_line(provider, line) << '\n' << std::flush;
    }
}

} // namespace vforest::rpc
