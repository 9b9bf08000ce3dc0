#pragma once

// JSON wire format shared by the HTTP provider clients and the provider server.
//
//   POST /v1/flow     {prev_png_b64, curr_png_b64}                 -> {flow_b64}
//   POST /v1/detect   {image_png_b64, queries, threshold}          -> {detections:[{box, score, label_index}]}
//   POST /v1/session  {frames:[png_b64...]}                        -> {session_id}
//   POST /v1/track    {session_id, direction, prompts:[{frame, box, point|null}]}
//                                                                  -> {masks:[{frame, png_b64}]}
//   GET  /v1/capabilities                                          -> capabilities object
//
// Images travel as base64 PNG; flow travels as a base64 Middlebury payload.
// Every request may carry X-Request-Id; repeats return the cached response.

#include <string>
#include <vector>

#include <json.hpp>

#include "vcos/detection.hpp"
#include "vcos/providers.hpp"
#include "vcos/tracking.hpp"
#include "vcos/video_model.hpp"

namespace vcos::protocol {

using json = nlohmann::json;

inline constexpr const char* kApiVersion = "v1";
inline constexpr const char* kRequestIdHeader = "X-Request-Id";

std::string frame_to_b64(const Frame& frame);
Frame frame_from_b64(const std::string& b64, int index = 0);
std::string mask_to_b64(const BinaryMask& mask);
BinaryMask mask_from_b64(const std::string& b64);
std::string flow_to_b64(const FlowField& flow);
FlowField flow_from_b64(const std::string& b64);

json box_to_json(const BoundingBox& box);
BoundingBox box_from_json(const json& j);

json detection_to_json(const Detection& d);
// Throws MalformedResponse when a field is missing or has the wrong type.
Detection detection_from_json(const json& j);

json prompt_to_json(const MaskPrompt& p);
MaskPrompt prompt_from_json(const json& j);

json masks_to_json(const MaskSeries& series);
MaskSeries masks_from_json(const json& j);

struct ServerCapabilities {
    bool supports_concurrent = true;
    int max_image_edge = 4096;
    std::string model_name;
    std::string flow_model;
    std::string detector_model;
    std::string segmenter_model;
};

json capabilities_to_json(const ServerCapabilities& caps);
ServerCapabilities capabilities_from_json(const json& j);

// Required-field accessors; all throw MalformedResponse.
const json& require(const json& j, const char* key);
std::string require_string(const json& j, const char* key);
double require_number(const json& j, const char* key);
int require_int(const json& j, const char* key);

// ---------------------------------------------------------------- conformance

struct GoldenCase {
    std::string name;
    std::string method;  // GET or POST
    std::string path;
    json body;
};

// Deterministic request fixtures exercised by conformance_check and the protocol tests.
Frame golden_frame(int width, int height, int seed, bool blue_square);
GoldenCase golden_flow_request();
GoldenCase golden_detect_request();
GoldenCase golden_session_request();

struct ConformanceResult {
    std::string endpoint;
    bool passed = false;
    std::string message;
};

struct ConformanceReport {
    std::vector<ConformanceResult> results;
    bool all_passed() const;
};

// Replays the golden suite against a running server and validates schema and encodings.
ConformanceReport conformance_check(const std::string& base_url, double timeout_s = 10.0);

}  // namespace vcos::protocol
