#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <random>
#include <thread>

#include "doctest.h"
#include "forge/guidance.hpp"
#include "forge/remote_oracle.hpp"
#include "test_support.hpp"

using namespace forge;
using forge::testing::random_image;

namespace {

class ZeroOracle final : public GuidanceOracle {
public:
    Image predict(const Image& z, int, const GuidanceCondition&) const override { return Image(z.width, z.height); }
};

/// Echoes the condition id length and timestep into the first pixel.
class ProbeOracle final : public GuidanceOracle {
public:
    Image predict(const Image& z, int t, const GuidanceCondition& c) const override {
        Image out(z.width, z.height);
        out.at(0, 0, 0) = t;
        out.at(0, 0, 1) = static_cast<double>(c.id.size());
        return out;
    }
};

class ThrowingOracle final : public GuidanceOracle {
public:
    Image predict(const Image&, int, const GuidanceCondition&) const override {
        throw std::runtime_error("model exploded");
    }
};

/// A TCP socket that listens but never accepts or answers.
struct SilentListener {
    int fd = -1;
    int port = 0;
    SilentListener() {
        fd = ::socket(AF_INET, SOCK_STREAM, 0);
        sockaddr_in a{};
        a.sin_family = AF_INET;
        a.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        ::bind(fd, reinterpret_cast<sockaddr*>(&a), sizeof a);
        ::listen(fd, 4);
        socklen_t len = sizeof a;
        ::getsockname(fd, reinterpret_cast<sockaddr*>(&a), &len);
        port = ntohs(a.sin_port);
    }
    ~SilentListener() { ::close(fd); }
};

}  // namespace

TEST_CASE("wire: image payload round trip is float32 exact") {
    std::mt19937_64 gen(1);
    const Image img = random_image(7, 5, gen, -3, 3);
    const Image back = wire::decode_image(wire::encode_image(img), 7, 5);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        CHECK(back.data[i] == static_cast<double>(static_cast<float>(img.data[i])));
    CHECK_THROWS_AS(wire::decode_image(wire::encode_image(img), 7, 4), GuidanceError);
    CHECK_THROWS_AS(wire::decode_image("!!!not base64", 1, 1), GuidanceError);
}

TEST_CASE("wire: request and response documents") {
    std::mt19937_64 gen(2);
    const Image img = random_image(3, 2, gen);
    const wire::Request req = wire::parse_request(wire::make_request(img, 417, "a prompt"));
    CHECK(req.timestep == 417);
    CHECK(req.condition_id == "a prompt");
    CHECK(req.noised.width == 3);
    CHECK(req.noised.height == 2);

    const std::string body = wire::make_request(img, 1, "x");
    CHECK(body.find("\"dtype\":\"f32\"") != std::string::npos);
    CHECK(body.find("\"shape\":[2,3,3]") != std::string::npos);

    CHECK(wire::parse_response(wire::make_response(img), 3, 2).width == 3);
    CHECK_THROWS_WITH_AS(wire::parse_response(wire::make_error("out of memory"), 3, 2),
                         doctest::Contains("out of memory"), GuidanceError);
    CHECK_THROWS_AS(wire::parse_response("{not json", 3, 2), GuidanceError);
    CHECK_THROWS_AS(wire::parse_request(R"({"shape":[2,3,3],"dtype":"f64","data_b64":"","timestep":1,"condition_id":""})"),
                    GuidanceError);
}

TEST_CASE("endpoint strings") {
    const Endpoint u = Endpoint::parse("unix:/tmp/x.sock");
    CHECK(u.kind == Endpoint::Kind::unix_socket);
    CHECK(u.path == "/tmp/x.sock");
    const Endpoint t = Endpoint::parse("tcp:127.0.0.1:8123");
    CHECK(t.kind == Endpoint::Kind::tcp);
    CHECK(t.host == "127.0.0.1");
    CHECK(t.port == 8123);
    CHECK(t.to_string() == "tcp:127.0.0.1:8123");
    CHECK_THROWS(Endpoint::parse("http://x"));
    CHECK_THROWS(Endpoint::parse("tcp:host:notaport"));
}

TEST_CASE("loopback zero server: gradient is minus the injected noise") {
    OracleServer server("tcp:127.0.0.1:0", std::make_shared<ZeroOracle>());
    const RemoteOracle remote(server.endpoint(), std::chrono::seconds(5));
    const DiffusionSchedule s;
    std::mt19937_64 gen(3);
    const Image x0 = random_image(6, 4, gen);
    const NoiseWeights w;
    Rng rng(77), replay(77);
    const GuidanceResult r = asds_gradient(s, remote, x0, {nullptr, "p"}, w, 0.2, 0.1, rng);
    const int t = sample_timestep(s, replay);
    const AvatarNoise n = compose_avatar_noise(w, 0.2, 0.1, replay, 6, 4);
    CHECK(r.timestep == t);
    for (std::size_t i = 0; i < x0.data.size(); ++i) CHECK(r.pixel_grad.data[i] == -n.epsilon.data[i]);
    CHECK(server.requests_served() == 1);
}

TEST_CASE("remote analytic oracle matches the in-process one") {
    const DiffusionSchedule s;
    std::mt19937_64 gen(4);
    const Image target = random_image(16, 12, gen);
    auto local = std::shared_ptr<const GuidanceOracle>(analytic_target_oracle(s, target));
    OracleServer server("tcp:127.0.0.1:0", local);
    const RemoteOracle remote(server.endpoint());
    for (int k = 0; k < 5; ++k) {
        const Image x0 = random_image(16, 12, gen);
        Rng a(static_cast<std::uint64_t>(k)), b(static_cast<std::uint64_t>(k));
        const GuidanceResult lr = sds_gradient(s, *local, x0, {}, a);
        const GuidanceResult rr = sds_gradient(s, remote, x0, {}, b);
        CHECK(lr.timestep == rr.timestep);
        // Both directions of the trip go through float32.
        const double scale = 1.0 / std::sqrt(1.0 - s.alpha_bar(lr.timestep));
        for (std::size_t i = 0; i < x0.data.size(); ++i)
            CHECK(std::abs(lr.pixel_grad.data[i] - rr.pixel_grad.data[i]) <= 1e-6 * std::max(1.0, scale * 4.0));
    }
}

TEST_CASE("remote oracle over a unix socket carries t and the condition id") {
    const auto dir = forge::testing::scratch_dir("remote-unix");
    const std::string ep = "unix:" + (dir / "oracle.sock").string();
    OracleServer server(ep, std::make_shared<ProbeOracle>());
    const RemoteOracle remote(server.endpoint());
    const Image out = remote.predict(Image(3, 3), 321, {nullptr, "hello"});
    CHECK(out.at(0, 0, 0) == 321.0);
    CHECK(out.at(0, 0, 1) == 5.0);
}

TEST_CASE("server-side failures come back as guidance errors") {
    OracleServer server("tcp:127.0.0.1:0", std::make_shared<ThrowingOracle>());
    const RemoteOracle remote(server.endpoint());
    CHECK_THROWS_WITH_AS(remote.predict(Image(2, 2), 10, {}), doctest::Contains("model exploded"), GuidanceError);
    // The server keeps serving after an error.
    CHECK_THROWS_AS(remote.predict(Image(2, 2), 10, {}), GuidanceError);
    CHECK(server.requests_served() == 2);
}

TEST_CASE("unreachable or silent endpoints fail within the timeout") {
    using clock = std::chrono::steady_clock;
    {
        // Nothing listens on this port once the listener is closed.
        int port = 0;
        {
            SilentListener l;
            port = l.port;
        }
        const RemoteOracle remote("tcp:127.0.0.1:" + std::to_string(port), std::chrono::milliseconds(300));
        const auto t0 = clock::now();
        CHECK_THROWS_AS(remote.predict(Image(2, 2), 10, {}), GuidanceError);
        CHECK(clock::now() - t0 < std::chrono::seconds(2));
    }
    {
        SilentListener l;
        const RemoteOracle remote("tcp:127.0.0.1:" + std::to_string(l.port), std::chrono::milliseconds(300));
        const auto t0 = clock::now();
        CHECK_THROWS_WITH_AS(remote.predict(Image(2, 2), 10, {}), doctest::Contains("timed out"), GuidanceError);
        const auto took = clock::now() - t0;
        CHECK(took >= std::chrono::milliseconds(250));
        CHECK(took < std::chrono::seconds(2));
    }
    {
        const RemoteOracle remote("unix:/nonexistent/forge.sock", std::chrono::milliseconds(300));
        CHECK_THROWS_AS(remote.predict(Image(2, 2), 10, {}), GuidanceError);
    }
}

TEST_CASE("server stop unblocks wait") {
    OracleServer server("tcp:127.0.0.1:0", std::make_shared<ZeroOracle>());
    std::thread stopper([&] {
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
        server.stop();
    });
    server.wait();
    stopper.join();
    CHECK(server.requests_served() == 0);
}
