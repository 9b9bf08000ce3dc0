#include "vcos/http_providers.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "vcos/errors.hpp"
#include "vcos/protocol.hpp"

namespace vcos {

using nlohmann::json;

void ProviderEndpoint::validate() const {
    if (base_url.empty()) throw ConfigError("provider endpoint has no base URL");
    if (!(timeout_s > 0)) throw ConfigError("provider timeout must be > 0");
    if (max_retries < 0) throw ConfigError("provider max_retries must be >= 0");
    if (backoff_s < 0) throw ConfigError("provider backoff must be >= 0");
}

JsonTransport::JsonTransport(ProviderEndpoint endpoint) : endpoint_(std::move(endpoint)) {
    endpoint_.validate();
    std::random_device rd;
    std::ostringstream os;
    os << std::hex << rd() << rd();
    id_prefix_ = os.str();
}

std::string JsonTransport::next_request_id() { return id_prefix_ + "-" + std::to_string(++counter_); }

json JsonTransport::get(const std::string& path) { return send("GET", path, {}); }

json JsonTransport::post(const std::string& path, const json& body) { return send("POST", path, body.dump()); }

json JsonTransport::send(const std::string& method, const std::string& path, const std::string& body) {
    const std::string full_path = "/" + endpoint_.api_version + path;
    const std::string request_id = next_request_id();
    const auto secs = static_cast<time_t>(std::floor(endpoint_.timeout_s));
    const auto usecs = static_cast<time_t>((endpoint_.timeout_s - static_cast<double>(secs)) * 1e6);

    std::string last_error;
    for (int attempt = 0; attempt <= endpoint_.max_retries; ++attempt) {
        if (attempt > 0) {
            const double delay = endpoint_.backoff_s * std::pow(2.0, attempt - 1);
            std::this_thread::sleep_for(std::chrono::duration<double>(delay));
        }
        ++attempts_;
        httplib::Client cli(endpoint_.base_url);
        cli.set_connection_timeout(secs, usecs);
        cli.set_read_timeout(secs, usecs);
        cli.set_write_timeout(secs, usecs);
        const httplib::Headers headers = {{protocol::kRequestIdHeader, request_id}};
        httplib::Result res = method == "GET" ? cli.Get(full_path, headers)
                                              : cli.Post(full_path, headers, body, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status == 404) throw UnknownReference(full_path + ": " + res->body);
        if (res->status != 200)
            throw MalformedResponse(full_path + ": HTTP " + std::to_string(res->status) + " " + res->body);
        if (res->body.empty()) throw MalformedResponse(full_path + ": empty response body");
        try {
            return json::parse(res->body);
        } catch (const json::exception& e) {
            throw MalformedResponse(full_path + ": invalid JSON: " + e.what());
        }
    }
    throw TransportError(method + " " + endpoint_.base_url + full_path + " failed after " +
                         std::to_string(endpoint_.max_retries + 1) + " attempts: " + last_error);
}

ProviderCapabilities fetch_capabilities(JsonTransport& transport, const char* role) {
    const auto caps = protocol::capabilities_from_json(transport.get("/capabilities"));
    ProviderCapabilities out;
    out.supports_concurrent = caps.supports_concurrent;
    out.max_image_edge = caps.max_image_edge;
    const std::string r = role;
    const std::string& specific = r == "flow" ? caps.flow_model : r == "detector" ? caps.detector_model
                                                                                  : caps.segmenter_model;
    out.model_name = specific.empty() ? caps.model_name : specific;
    return out;
}

// ---------------------------------------------------------------- flow

HttpFlowProvider::HttpFlowProvider(ProviderEndpoint endpoint) : transport_(std::move(endpoint)) {}

FlowField HttpFlowProvider::compute(const Frame& prev, const Frame& curr) {
    if (!prev.same_size(curr)) throw DimensionMismatch("flow frames differ in size");
    const json reply = transport_.post(
        "/flow", {{"prev_png_b64", protocol::frame_to_b64(prev)}, {"curr_png_b64", protocol::frame_to_b64(curr)}});
    FlowField flow;
    try {
        flow = protocol::flow_from_b64(protocol::require_string(reply, "flow_b64"));
    } catch (const FormatError& e) {
        throw MalformedResponse(std::string("flow payload: ") + e.what());
    }
    if (flow.width() != prev.width() || flow.height() != prev.height())
        throw MalformedResponse("flow dimensions do not match the input frames");
    if (!flow.all_finite()) throw MalformedResponse("flow contains non-finite values");
    return flow;
}

ProviderCapabilities HttpFlowProvider::capabilities() { return fetch_capabilities(transport_, "flow"); }

// ---------------------------------------------------------------- detector

HttpDetectorProvider::HttpDetectorProvider(ProviderEndpoint endpoint) : transport_(std::move(endpoint)) {}

std::vector<Detection> HttpDetectorProvider::detect(const Frame& image, const std::vector<std::string>& queries,
                                                    double threshold) {
    if (queries.empty()) throw InvalidArgument("detector queries must be non-empty");
    const json reply = transport_.post(
        "/detect", {{"image_png_b64", protocol::frame_to_b64(image)}, {"queries", queries}, {"threshold", threshold}});
    const json& arr = protocol::require(reply, "detections");
    if (!arr.is_array()) throw MalformedResponse("detections must be an array");
    std::vector<Detection> out;
    for (const auto& dj : arr) {
        Detection d = protocol::detection_from_json(dj);
        if (d.label_index < 0 || d.label_index >= static_cast<int>(queries.size()))
            throw MalformedResponse("label_index " + std::to_string(d.label_index) + " outside the query list");
        if (d.score >= threshold) out.push_back(d);
    }
    return out;
}

ProviderCapabilities HttpDetectorProvider::capabilities() { return fetch_capabilities(transport_, "detector"); }

// ---------------------------------------------------------------- segmenter

HttpSegmenterProvider::HttpSegmenterProvider(ProviderEndpoint endpoint) : transport_(std::move(endpoint)) {}

std::string HttpSegmenterProvider::open_session(const VideoSequence& video) {
    json frames = json::array();
    for (const auto& f : video.frames()) frames.push_back(protocol::frame_to_b64(f));
    const json reply = transport_.post("/session", {{"frames", frames}});
    std::string id = protocol::require_string(reply, "session_id");
    if (id.empty()) throw MalformedResponse("empty session_id");
    return id;
}

MaskSeries HttpSegmenterProvider::track(const std::string& session, const PromptTimeline& prompts, Direction dir) {
    json plist = json::array();
    for (const auto& p : prompts.prompts) plist.push_back(protocol::prompt_to_json(p));
    const json reply =
        transport_.post("/track", {{"session_id", session}, {"direction", to_string(dir)}, {"prompts", plist}});
    return protocol::masks_from_json(reply);
}

void HttpSegmenterProvider::close_session(const std::string&) {}

ProviderCapabilities HttpSegmenterProvider::capabilities() { return fetch_capabilities(transport_, "segmenter"); }

}  // namespace vcos
