#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "forge/guidance.hpp"

namespace forge {

// Wire format: every message is a 4-byte little-endian length followed by a
// UTF-8 JSON object of that many bytes.
//   request:  {"shape":[H,W,3], "dtype":"f32", "data_b64":..., "timestep":t, "condition_id":...}
//   response: {"data_b64":...} or {"error":"..."}
// Pixel data is row-major float32, little-endian, then base64 encoded.
namespace wire {

std::string encode_image(const Image& image);
/// Throws GuidanceError if the payload does not hold width*height*3 floats.
Image decode_image(const std::string& b64, int width, int height);

std::string make_request(const Image& noised, int t, const std::string& condition_id);
std::string make_response(const Image& eps);
std::string make_error(const std::string& message);

struct Request {
    Image noised;
    int timestep = 0;
    std::string condition_id;
};
Request parse_request(const std::string& body);
/// Throws GuidanceError carrying the server message for error responses.
Image parse_response(const std::string& body, int width, int height);

constexpr std::uint32_t kMaxMessageBytes = 512u << 20;

}  // namespace wire

/// Endpoint string: "unix:/path/to/socket" or "tcp:host:port".
struct Endpoint {
    enum class Kind { unix_socket, tcp } kind = Kind::tcp;
    std::string path;  // unix
    std::string host;  // tcp
    int port = 0;

    static Endpoint parse(const std::string& spec);
    std::string to_string() const;
};

/// Client side. One connection per request; requests from multiple threads
/// are serialized.
class RemoteOracle final : public GuidanceOracle {
public:
    explicit RemoteOracle(const std::string& endpoint, std::chrono::milliseconds timeout = std::chrono::seconds(30));
    Image predict(const Image& noised, int t, const GuidanceCondition& condition) const override;

private:
    Endpoint endpoint_;
    std::chrono::milliseconds timeout_;
    mutable std::mutex mutex_;
};

/// Serves any in-process oracle over the wire protocol on a background
/// thread. Binding "tcp:127.0.0.1:0" picks a free port; endpoint() reports it.
class OracleServer {
public:
    OracleServer(const std::string& endpoint, std::shared_ptr<const GuidanceOracle> oracle);
    ~OracleServer();
    OracleServer(const OracleServer&) = delete;
    OracleServer& operator=(const OracleServer&) = delete;

    std::string endpoint() const { return bound_.to_string(); }
    /// Blocks until stop() is called from another thread or a signal handler.
    void wait();
    void stop();
    std::size_t requests_served() const { return served_.load(); }

private:
    void loop();

    Endpoint bound_;
    std::shared_ptr<const GuidanceOracle> oracle_;
    int listen_fd_ = -1;
    int wake_pipe_[2] = {-1, -1};
    std::atomic<bool> stopping_{false};
    std::atomic<std::size_t> served_{0};
    std::thread thread_;
};

}  // namespace forge
