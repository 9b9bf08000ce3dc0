#pragma once

// HTTP clients for the provider wire protocol (see protocol.hpp).

#include <atomic>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

#include "vcos/providers.hpp"

namespace vcos {

struct ProviderEndpoint {
    std::string base_url;  // e.g. http://127.0.0.1:8765
    double timeout_s = 30.0;
    int max_retries = 3;
    std::string api_version = "v1";
    double backoff_s = 0.5;  // first retry delay, doubled on each further retry

    void validate() const;
};

// JSON-over-HTTP transport. Each logical request gets one X-Request-Id that is
// reused across its retries. Connection failures and 5xx responses are retried;
// 404 raises UnknownReference and other statuses raise MalformedResponse.
class JsonTransport {
public:
    explicit JsonTransport(ProviderEndpoint endpoint);

    nlohmann::json get(const std::string& path);
    nlohmann::json post(const std::string& path, const nlohmann::json& body);

    const ProviderEndpoint& endpoint() const { return endpoint_; }
    // Number of HTTP attempts made so far, including retries.
    long attempts() const { return attempts_.load(); }

private:
    nlohmann::json send(const std::string& method, const std::string& path, const std::string& body);
    std::string next_request_id();

    ProviderEndpoint endpoint_;
    std::string id_prefix_;
    std::atomic<long> counter_{0};
    std::atomic<long> attempts_{0};
};

class HttpFlowProvider : public FlowProvider {
public:
    explicit HttpFlowProvider(ProviderEndpoint endpoint);
    FlowField compute(const Frame& prev, const Frame& curr) override;
    ProviderCapabilities capabilities() override;

private:
    JsonTransport transport_;
};

class HttpDetectorProvider : public DetectorProvider {
public:
    explicit HttpDetectorProvider(ProviderEndpoint endpoint);
    std::vector<Detection> detect(const Frame& image, const std::vector<std::string>& queries,
                                  double threshold) override;
    ProviderCapabilities capabilities() override;

private:
    JsonTransport transport_;
};

// Sessions live on the server and are evicted by its LRU; close_session is local only.
class HttpSegmenterProvider : public SegmenterProvider {
public:
    explicit HttpSegmenterProvider(ProviderEndpoint endpoint);
    std::string open_session(const VideoSequence& video) override;
    MaskSeries track(const std::string& session, const PromptTimeline& prompts, Direction dir) override;
    void close_session(const std::string& session) override;
    ProviderCapabilities capabilities() override;

private:
    JsonTransport transport_;
};

// Fetches /v1/capabilities and maps it to the provider-facing struct.
ProviderCapabilities fetch_capabilities(JsonTransport& transport, const char* role);

}  // namespace vcos
