#include "forge/remote_oracle.hpp"

#include <cerrno>
#include <cstring>
#include <string>

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include "text_util.hpp"

namespace forge {

namespace {

using Clock = std::chrono::steady_clock;

class Fd {
public:
    explicit Fd(int fd = -1) : fd_(fd) {}
    ~Fd() {
        if (fd_ >= 0) ::close(fd_);
    }
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    int get() const { return fd_; }

private:
    int fd_;
};

std::string sys_error(const std::string& what) { return what + ": " + std::strerror(errno); }

int remaining_ms(Clock::time_point deadline) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    return left < 0 ? 0 : static_cast<int>(left);
}

void wait_ready(int fd, short events, Clock::time_point deadline, const char* what) {
    for (;;) {
        pollfd p{fd, events, 0};
        const int r = ::poll(&p, 1, remaining_ms(deadline));
        if (r > 0) return;
        if (r == 0) throw GuidanceError(std::string("oracle ") + what + " timed out");
        if (errno != EINTR) throw GuidanceError(sys_error(std::string("oracle ") + what));
    }
}

void send_all(int fd, const char* data, std::size_t n, Clock::time_point deadline) {
    while (n > 0) {
        wait_ready(fd, POLLOUT, deadline, "send");
        const ssize_t w = ::send(fd, data, n, MSG_NOSIGNAL);
        if (w < 0) {
            if (errno == EINTR || errno == EAGAIN || errno == EWOULDBLOCK) continue;
            throw GuidanceError(sys_error("oracle send"));
        }
        data += w;
        n -= static_cast<std::size_t>(w);
    }
}

void recv_all(int fd, char* data, std::size_t n, Clock::time_point deadline) {
    while (n > 0) {
        wait_ready(fd, POLLIN, deadline, "receive");
        const ssize_t r = ::recv(fd, data, n, 0);
        if (r == 0) throw GuidanceError("oracle connection closed mid-message");
        if (r < 0) {
            if (errno == EINTR || errno == EAGAIN || errno == EWOULDBLOCK) continue;
            throw GuidanceError(sys_error("oracle receive"));
        }
        data += r;
        n -= static_cast<std::size_t>(r);
    }
}

void send_message(int fd, const std::string& body, Clock::time_point deadline) {
    const auto n = static_cast<std::uint32_t>(body.size());
    const unsigned char header[4] = {static_cast<unsigned char>(n), static_cast<unsigned char>(n >> 8),
                                     static_cast<unsigned char>(n >> 16), static_cast<unsigned char>(n >> 24)};
    send_all(fd, reinterpret_cast<const char*>(header), 4, deadline);
    send_all(fd, body.data(), body.size(), deadline);
}

std::string recv_message(int fd, Clock::time_point deadline) {
    unsigned char header[4];
    recv_all(fd, reinterpret_cast<char*>(header), 4, deadline);
    const std::uint32_t n = header[0] | (header[1] << 8) | (header[2] << 16) | (std::uint32_t(header[3]) << 24);
    if (n > wire::kMaxMessageBytes) throw GuidanceError("oracle message too large");
    std::string body(n, '\0');
    recv_all(fd, body.data(), n, deadline);
    return body;
}

void set_nonblocking(int fd) { ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL, 0) | O_NONBLOCK); }

int connect_endpoint(const Endpoint& ep, Clock::time_point deadline) {
    int fd = -1;
    if (ep.kind == Endpoint::Kind::unix_socket) {
        sockaddr_un addr{};
        addr.sun_family = AF_UNIX;
        if (ep.path.size() >= sizeof(addr.sun_path)) throw GuidanceError("oracle socket path too long");
        std::memcpy(addr.sun_path, ep.path.c_str(), ep.path.size() + 1);
        fd = ::socket(AF_UNIX, SOCK_STREAM, 0);
        if (fd < 0) throw GuidanceError(sys_error("oracle socket"));
        set_nonblocking(fd);
        if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 && errno != EINPROGRESS &&
            errno != EAGAIN) {
            const std::string msg = sys_error("oracle connect " + ep.to_string());
            ::close(fd);
            throw GuidanceError(msg);
        }
    } else {
        addrinfo hints{};
        hints.ai_family = AF_UNSPEC;
        hints.ai_socktype = SOCK_STREAM;
        addrinfo* res = nullptr;
        const std::string port = std::to_string(ep.port);
        if (const int rc = ::getaddrinfo(ep.host.c_str(), port.c_str(), &hints, &res); rc != 0)
            throw GuidanceError("oracle resolve " + ep.host + ": " + ::gai_strerror(rc));
        fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
        if (fd < 0) {
            ::freeaddrinfo(res);
            throw GuidanceError(sys_error("oracle socket"));
        }
        set_nonblocking(fd);
        const int rc = ::connect(fd, res->ai_addr, res->ai_addrlen);
        ::freeaddrinfo(res);
        if (rc < 0 && errno != EINPROGRESS) {
            const std::string msg = sys_error("oracle connect " + ep.to_string());
            ::close(fd);
            throw GuidanceError(msg);
        }
        int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    }
    try {
        wait_ready(fd, POLLOUT, deadline, "connect");
    } catch (...) {
        ::close(fd);
        throw;
    }
    int err = 0;
    socklen_t len = sizeof(err);
    ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) {
        ::close(fd);
        throw GuidanceError("oracle connect " + ep.to_string() + ": " + std::strerror(err));
    }
    return fd;
}

}  // namespace

Endpoint Endpoint::parse(const std::string& spec) {
    Endpoint ep;
    if (spec.rfind("unix:", 0) == 0) {
        ep.kind = Kind::unix_socket;
        ep.path = spec.substr(5);
        if (ep.path.empty()) throw std::invalid_argument("endpoint '" + spec + "': empty socket path");
        return ep;
    }
    if (spec.rfind("tcp:", 0) == 0) {
        const std::string rest = spec.substr(4);
        const auto colon = rest.rfind(':');
        if (colon == std::string::npos || colon == 0)
            throw std::invalid_argument("endpoint '" + spec + "': expected tcp:host:port");
        ep.kind = Kind::tcp;
        ep.host = rest.substr(0, colon);
        int port = -1;
        if (!text::parse_int(rest.substr(colon + 1), port) || port < 0 || port > 65535)
            throw std::invalid_argument("endpoint '" + spec + "': bad port");
        ep.port = port;
        return ep;
    }
    throw std::invalid_argument("endpoint '" + spec + "': expected unix:<path> or tcp:<host>:<port>");
}

std::string Endpoint::to_string() const {
    if (kind == Kind::unix_socket) return "unix:" + path;
    return "tcp:" + host + ":" + std::to_string(port);
}

RemoteOracle::RemoteOracle(const std::string& endpoint, std::chrono::milliseconds timeout)
    : endpoint_(Endpoint::parse(endpoint)), timeout_(timeout) {}

Image RemoteOracle::predict(const Image& noised, int t, const GuidanceCondition& condition) const {
    std::lock_guard lock(mutex_);
    const auto deadline = Clock::now() + timeout_;
    Fd fd(connect_endpoint(endpoint_, deadline));
    send_message(fd.get(), wire::make_request(noised, t, condition.id), deadline);
    return wire::parse_response(recv_message(fd.get(), deadline), noised.width, noised.height);
}

OracleServer::OracleServer(const std::string& endpoint, std::shared_ptr<const GuidanceOracle> oracle)
    : bound_(Endpoint::parse(endpoint)), oracle_(std::move(oracle)) {
    if (!oracle_) throw std::invalid_argument("oracle server: null oracle");
    if (bound_.kind == Endpoint::Kind::unix_socket) {
        sockaddr_un addr{};
        addr.sun_family = AF_UNIX;
        if (bound_.path.size() >= sizeof(addr.sun_path)) throw GuidanceError("oracle socket path too long");
        std::memcpy(addr.sun_path, bound_.path.c_str(), bound_.path.size() + 1);
        ::unlink(bound_.path.c_str());
        listen_fd_ = ::socket(AF_UNIX, SOCK_STREAM, 0);
        if (listen_fd_ < 0 || ::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0)
            throw GuidanceError(sys_error("oracle server bind " + bound_.to_string()));
    } else {
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(static_cast<std::uint16_t>(bound_.port));
        if (::inet_pton(AF_INET, bound_.host == "localhost" ? "127.0.0.1" : bound_.host.c_str(), &addr.sin_addr) != 1)
            throw GuidanceError("oracle server: host must be an IPv4 address: " + bound_.host);
        listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        int one = 1;
        if (listen_fd_ >= 0) ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        if (listen_fd_ < 0 || ::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0)
            throw GuidanceError(sys_error("oracle server bind " + bound_.to_string()));
        socklen_t len = sizeof(addr);
        ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
        bound_.port = ntohs(addr.sin_port);
    }
    if (::listen(listen_fd_, 16) < 0) throw GuidanceError(sys_error("oracle server listen"));
    if (::pipe(wake_pipe_) < 0) throw GuidanceError(sys_error("oracle server pipe"));
    thread_ = std::thread([this] { loop(); });
}

OracleServer::~OracleServer() {
    stop();
    if (thread_.joinable()) thread_.join();
    if (listen_fd_ >= 0) ::close(listen_fd_);
    for (int fd : wake_pipe_)
        if (fd >= 0) ::close(fd);
    if (bound_.kind == Endpoint::Kind::unix_socket) ::unlink(bound_.path.c_str());
}

void OracleServer::stop() {
    if (stopping_.exchange(true)) return;
    const char c = 1;
    [[maybe_unused]] const auto w = ::write(wake_pipe_[1], &c, 1);
}

void OracleServer::wait() {
    if (thread_.joinable()) thread_.join();
}

void OracleServer::loop() {
    constexpr auto kClientTimeout = std::chrono::seconds(30);
    while (!stopping_.load()) {
        pollfd fds[2] = {{listen_fd_, POLLIN, 0}, {wake_pipe_[0], POLLIN, 0}};
        if (::poll(fds, 2, -1) < 0) {
            if (errno == EINTR) continue;
            return;
        }
        if (fds[1].revents || stopping_.load()) return;
        const int client = ::accept(listen_fd_, nullptr, nullptr);
        if (client < 0) continue;
        Fd guard(client);
        set_nonblocking(client);
        const auto deadline = Clock::now() + kClientTimeout;
        std::string reply;
        try {
            const wire::Request req = wire::parse_request(recv_message(client, deadline));
            GuidanceCondition cond;
            cond.id = req.condition_id;
            try {
                reply = wire::make_response(oracle_->predict(req.noised, req.timestep, cond));
            } catch (const std::exception& e) {
                reply = wire::make_error(e.what());
            }
        } catch (const std::exception& e) {
            reply = wire::make_error(e.what());
        }
        try {
            send_message(client, reply, deadline);
            served_.fetch_add(1);
        } catch (const GuidanceError&) {
        }
    }
}

}  // namespace forge
