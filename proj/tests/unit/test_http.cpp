#include <doctest.h>

#include <atomic>
#include <chrono>
#include <functional>
#include <thread>

#include <httplib.h>

#include "test_support.hpp"
#include "vcos/base64.hpp"
#include "vcos/errors.hpp"
#include "vcos/http_providers.hpp"
#include "vcos/mock_providers.hpp"
#include "vcos/provider_server.hpp"

using namespace vcos;
using nlohmann::json;

namespace {

protocol::ServerCapabilities mock_caps() { return {true, 4096, "mock", "pattern", "highlight", "box"}; }

ProviderEndpoint endpoint_for(const std::string& url, int retries = 1) {
    ProviderEndpoint e;
    e.base_url = url;
    e.timeout_s = 5;
    e.max_retries = retries;
    e.backoff_s = 0.01;
    return e;
}

// A hand-rolled server for misbehaving peers.
class FakeServer {
public:
    using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

    explicit FakeServer(Handler h) {
        auto wrap = [this, h](const httplib::Request& req, httplib::Response& res) {
            ++hits;
            h(req, res);
        };
        server_.Get(R"(/v1/.*)", wrap);
        server_.Post(R"(/v1/.*)", wrap);
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeServer() {
        server_.stop();
        thread_.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

    std::atomic<int> hits{0};

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
};

// Answers like the mock server, except for the pieces a test overrides.
void good_reply(const httplib::Request& req, httplib::Response& res) {
    if (req.path == "/v1/capabilities") {
        res.set_content(protocol::capabilities_to_json(mock_caps()).dump(), "application/json");
    } else if (req.path == "/v1/flow") {
        res.set_content(json{{"flow_b64", protocol::flow_to_b64(FlowField(16, 12))}}.dump(), "application/json");
    } else if (req.path == "/v1/detect") {
        res.set_content(json{{"detections", json::array()}}.dump(), "application/json");
    } else if (req.path == "/v1/session") {
        res.set_content(json{{"session_id", "s1"}}.dump(), "application/json");
    } else if (req.path == "/v1/track") {
        const auto body = json::parse(req.body);
        if (body["session_id"] != "s1") {
            res.status = 404;
            return;
        }
        res.set_content(json{{"masks", json::array()}}.dump(), "application/json");
    }
}

}  // namespace

TEST_CASE("mock provider server passes conformance") {
    ProviderServer server(make_generic_mocks(), mock_caps());
    server.start("127.0.0.1", 0);
    const auto report = protocol::conformance_check(server.base_url(), 5);
    for (const auto& r : report.results) {
        CAPTURE(r.endpoint);
        CAPTURE(r.message);
        CHECK(r.passed);
    }
    CHECK(report.results.size() == 7);
    CHECK(report.all_passed());
}

TEST_CASE("flow is bit exact over http") {
    ProviderServer server(make_generic_mocks(), mock_caps());
    server.start("127.0.0.1", 0);
    HttpFlowProvider remote(endpoint_for(server.base_url()));
    PatternFlowProvider local;
    const Frame a = vcos::testing::textured_frame(40, 30, 3);
    const Frame b = vcos::testing::textured_frame(40, 30, 3, 1.5, -0.5);
    const FlowField want = local.compute(a, b);
    const FlowField got = remote.compute(a, b);
    REQUIRE(got.same_size(want));
    bool all_same = true;
    for (std::size_t i = 0; i < want.data().size(); ++i)
        all_same &= std::bit_cast<std::uint32_t>(got.data()[i]) == std::bit_cast<std::uint32_t>(want.data()[i]);
    CHECK(all_same);
    CHECK(remote.capabilities().model_name == "pattern");
}

TEST_CASE("detector and segmenter over http match in-process mocks") {
    ProviderServer server(make_generic_mocks(), mock_caps());
    server.start("127.0.0.1", 0);
    HttpDetectorProvider det(endpoint_for(server.base_url()));
    HighlightDetectorProvider local;
    Frame f = vcos::testing::textured_frame(48, 40, 6);
    for (int y = 8; y < 20; ++y)
        for (int x = 10; x < 30; ++x) f.set(x, y, {0, 0, 255});
    const std::vector<std::string> q{"a", "b"};
    CHECK(det.detect(f, q, 0.1) == local.detect(f, q, 0.1));
    CHECK(det.detect(f, q, 0.9).empty());
    CHECK(det.capabilities().model_name == "highlight");

    HttpSegmenterProvider seg(endpoint_for(server.base_url()));
    BoxPropagationSegmenter local_seg;
    const VideoSequence v({f, f, f, f}, "v");
    const PromptTimeline prompts{{{1, {10, 8, 30, 20}, Point2{20, 14}}}};
    const auto remote_masks = seg.track(seg.open_session(v), prompts, Direction::Backward);
    const auto local_masks = local_seg.track(local_seg.open_session(v), prompts, Direction::Backward);
    CHECK(remote_masks.masks == local_masks.masks);
    CHECK(server.live_sessions() == 1);
}

TEST_CASE("stale and evicted sessions are unknown references") {
    ServerOptions opts;
    opts.session_capacity = 2;
    ProviderServer server(make_generic_mocks(), mock_caps(), opts);
    server.start("127.0.0.1", 0);
    HttpSegmenterProvider seg(endpoint_for(server.base_url()));
    const VideoSequence v({Frame(8, 8), Frame(8, 8)}, "v");
    const PromptTimeline p{{{0, {1, 1, 4, 4}, std::nullopt}}};
    const auto first = seg.open_session(v);
    CHECK_NOTHROW(seg.track(first, p, Direction::Forward));
    seg.open_session(v);
    seg.open_session(v);
    CHECK(server.live_sessions() == 2);
    CHECK_THROWS_AS(seg.track(first, p, Direction::Forward), UnknownReference);
    CHECK_THROWS_AS(seg.track("never-opened", p, Direction::Forward), UnknownReference);
    // The base class is what callers catch.
    CHECK_THROWS_AS(seg.track(first, p, Direction::Forward), ProviderError);
}

TEST_CASE("unreachable server raises transport error after retries") {
    int port = 0;
    {
        httplib::Server probe;
        port = probe.bind_to_any_port("127.0.0.1");
    }
    ProviderEndpoint e = endpoint_for("http://127.0.0.1:" + std::to_string(port), 2);
    e.timeout_s = 1;
    JsonTransport t(e);
    const auto t0 = std::chrono::steady_clock::now();
    CHECK_THROWS_AS(t.get("/capabilities"), TransportError);
    CHECK(t.attempts() == 3);
    CHECK(std::chrono::steady_clock::now() - t0 >= std::chrono::milliseconds(30));

    HttpFlowProvider flow(e);
    CHECK_THROWS_AS(flow.compute(Frame(4, 4), Frame(4, 4)), TransportError);
}

TEST_CASE("server errors are retried, client errors are not") {
    std::atomic<int> calls{0};
    FakeServer flaky([&](const httplib::Request& req, httplib::Response& res) {
        if (++calls < 3) {
            res.status = 503;
            return;
        }
        good_reply(req, res);
    });
    JsonTransport t(endpoint_for(flaky.url(), 3));
    CHECK_NOTHROW(t.get("/capabilities"));
    CHECK(t.attempts() == 3);

    FakeServer bad_request([](const httplib::Request&, httplib::Response& res) {
        res.status = 400;
        res.set_content("{\"error\":\"no\"}", "application/json");
    });
    JsonTransport t2(endpoint_for(bad_request.url(), 3));
    CHECK_THROWS_AS(t2.get("/capabilities"), MalformedResponse);
    CHECK(t2.attempts() == 1);
}

TEST_CASE("retries reuse one request id") {
    std::vector<std::string> ids;
    std::mutex mu;
    FakeServer flaky([&](const httplib::Request& req, httplib::Response& res) {
        std::lock_guard lock(mu);
        ids.push_back(req.get_header_value(protocol::kRequestIdHeader));
        if (ids.size() < 2) {
            res.status = 500;
            return;
        }
        good_reply(req, res);
    });
    JsonTransport t(endpoint_for(flaky.url(), 2));
    t.get("/capabilities");
    t.get("/capabilities");
    REQUIRE(ids.size() == 3);
    CHECK_FALSE(ids[0].empty());
    CHECK(ids[0] == ids[1]);
    CHECK(ids[1] != ids[2]);
}

TEST_CASE("malformed replies") {
    SUBCASE("empty body") {
        FakeServer s([](const httplib::Request&, httplib::Response& res) { res.set_content("", "application/json"); });
        CHECK_THROWS_AS(JsonTransport(endpoint_for(s.url())).get("/capabilities"), MalformedResponse);
    }
    SUBCASE("not json") {
        FakeServer s([](const httplib::Request&, httplib::Response& res) { res.set_content("<html>", "text/html"); });
        CHECK_THROWS_AS(JsonTransport(endpoint_for(s.url())).get("/capabilities"), MalformedResponse);
    }
    SUBCASE("detection without label index") {
        FakeServer s([](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"detections":[{"box":[1,1,5,5],"score":0.9}]})", "application/json");
        });
        HttpDetectorProvider det(endpoint_for(s.url()));
        CHECK_THROWS_AS(det.detect(Frame(8, 8), {"a"}, 0.1), MalformedResponse);
    }
    SUBCASE("label index outside the query list") {
        FakeServer s([](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"detections":[{"box":[1,1,5,5],"score":0.9,"label_index":3}]})", "application/json");
        });
        HttpDetectorProvider det(endpoint_for(s.url()));
        CHECK_THROWS_AS(det.detect(Frame(8, 8), {"a", "b"}, 0.1), MalformedResponse);
    }
    SUBCASE("flow with a wrong magic") {
        FakeServer s([](const httplib::Request&, httplib::Response& res) {
            auto bytes = encode_flow(FlowField(4, 4));
            bytes[0] = 'X';
            res.set_content(json{{"flow_b64", base64_encode(bytes)}}.dump(), "application/json");
        });
        HttpFlowProvider flow(endpoint_for(s.url()));
        CHECK_THROWS_AS(flow.compute(Frame(4, 4), Frame(4, 4)), MalformedResponse);
    }
    SUBCASE("flow of the wrong size") {
        FakeServer s([](const httplib::Request&, httplib::Response& res) {
            res.set_content(json{{"flow_b64", protocol::flow_to_b64(FlowField(3, 4))}}.dump(), "application/json");
        });
        HttpFlowProvider flow(endpoint_for(s.url()));
        CHECK_THROWS_AS(flow.compute(Frame(4, 4), Frame(4, 4)), MalformedResponse);
    }
}

TEST_CASE("conformance flags broken servers") {
    auto failed = [](const protocol::ConformanceReport& r, const std::string& endpoint) {
        for (const auto& x : r.results)
            if (x.endpoint == endpoint) return !x.passed;
        return false;
    };
    {
        FakeServer good(good_reply);
        const auto r = protocol::conformance_check(good.url(), 5);
        for (const auto& x : r.results) {
            CAPTURE(x.endpoint);
            CAPTURE(x.message);
            CHECK(x.passed);
        }
    }
    {
        FakeServer s([](const httplib::Request& req, httplib::Response& res) {
            if (req.path == "/v1/detect")
                res.set_content(R"({"detections":[{"box":[1,1,5,5],"score":0.9}]})", "application/json");
            else
                good_reply(req, res);
        });
        const auto r = protocol::conformance_check(s.url(), 5);
        CHECK_FALSE(r.all_passed());
        CHECK(failed(r, "detect"));
        CHECK_FALSE(failed(r, "flow"));
    }
    {
        FakeServer s([](const httplib::Request& req, httplib::Response& res) {
            if (req.path == "/v1/flow") {
                auto bytes = encode_flow(FlowField(16, 12));
                bytes[3] = 'X';
                res.set_content(json{{"flow_b64", base64_encode(bytes)}}.dump(), "application/json");
            } else {
                good_reply(req, res);
            }
        });
        const auto r = protocol::conformance_check(s.url(), 5);
        CHECK(failed(r, "flow"));
        CHECK_FALSE(r.all_passed());
    }
    {
        int n = 0;
        FakeServer s([&n](const httplib::Request& req, httplib::Response& res) {
            if (req.path == "/v1/detect")
                res.set_content(json{{"detections", json::array()}, {"n", ++n}}.dump(), "application/json");
            else
                good_reply(req, res);
        });
        CHECK(failed(protocol::conformance_check(s.url(), 5), "request_id_dedup"));
    }
    {
        FakeServer s([](const httplib::Request& req, httplib::Response& res) {
            if (req.path == "/v1/track") res.set_content(json{{"masks", json::array()}}.dump(), "application/json");
            else good_reply(req, res);
        });
        CHECK(failed(protocol::conformance_check(s.url(), 5), "track_unknown_session"));
    }
    CHECK_FALSE(protocol::conformance_check("http://127.0.0.1:1", 1).all_passed());
}

TEST_CASE("duplicate request ids return the cached body") {
    ProviderServer server(make_generic_mocks(), mock_caps());
    server.start("127.0.0.1", 0);
    httplib::Client cli(server.base_url());
    const auto body = protocol::golden_session_request().body.dump();
    const httplib::Headers h{{protocol::kRequestIdHeader, "same"}};
    auto a = cli.Post("/v1/session", h, body, "application/json");
    auto b = cli.Post("/v1/session", h, body, "application/json");
    REQUIRE(a);
    REQUIRE(b);
    CHECK(a->body == b->body);
    CHECK(server.live_sessions() == 1);
    auto c = cli.Post("/v1/session", httplib::Headers{{protocol::kRequestIdHeader, "other"}}, body, "application/json");
    REQUIRE(c);
    CHECK(c->body != a->body);
    CHECK(server.live_sessions() == 2);
}

TEST_CASE("server rejects bad requests") {
    ProviderServer server(make_generic_mocks(), mock_caps());
    server.start("127.0.0.1", 0);
    httplib::Client cli(server.base_url());
    auto r = cli.Post("/v1/detect", "{not json", "application/json");
    REQUIRE(r);
    CHECK(r->status == 400);
    r = cli.Post("/v1/detect", json{{"queries", json::array({"a"})}, {"threshold", 0.1}}.dump(), "application/json");
    REQUIRE(r);
    CHECK(r->status == 400);
    r = cli.Post("/v1/track", json{{"session_id", "x"}, {"direction", "sideways"}, {"prompts", json::array()}}.dump(),
                 "application/json");
    REQUIRE(r);
    CHECK(r->status == 400);

    ProviderServer empty(ProviderSet{}, mock_caps());
    empty.start("127.0.0.1", 0);
    JsonTransport t(endpoint_for(empty.base_url(), 0));
    CHECK_THROWS_AS(t.post("/flow", protocol::golden_flow_request().body), TransportError);
}

TEST_CASE("endpoint validation") {
    ProviderEndpoint e;
    CHECK_THROWS_AS(e.validate(), ConfigError);
    e.base_url = "http://x";
    e.max_retries = -1;
    CHECK_THROWS_AS(JsonTransport{e}, ConfigError);
}
