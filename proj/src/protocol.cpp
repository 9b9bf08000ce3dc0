#include "vcos/protocol.hpp"

#include <cmath>

#include <httplib.h>

#include "vcos/base64.hpp"
#include "vcos/errors.hpp"
#include "vcos/image_codec.hpp"

namespace vcos::protocol {

std::string frame_to_b64(const Frame& frame) { return base64_encode(encode_png(frame)); }

Frame frame_from_b64(const std::string& b64, int index) { return decode_image(base64_decode(b64), index); }

std::string mask_to_b64(const BinaryMask& mask) { return base64_encode(encode_png(mask)); }

BinaryMask mask_from_b64(const std::string& b64) { return decode_mask(base64_decode(b64)); }

std::string flow_to_b64(const FlowField& flow) { return base64_encode(encode_flow(flow)); }

FlowField flow_from_b64(const std::string& b64) { return decode_flow(base64_decode(b64)); }

const json& require(const json& j, const char* key) {
    if (!j.is_object()) throw MalformedResponse("expected a JSON object");
    const auto it = j.find(key);
    if (it == j.end()) throw MalformedResponse(std::string("missing field '") + key + "'");
    return *it;
}

std::string require_string(const json& j, const char* key) {
    const json& v = require(j, key);
    if (!v.is_string()) throw MalformedResponse(std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
}

double require_number(const json& j, const char* key) {
    const json& v = require(j, key);
    if (!v.is_number()) throw MalformedResponse(std::string("field '") + key + "' must be a number");
    return v.get<double>();
}

int require_int(const json& j, const char* key) {
    const json& v = require(j, key);
    if (!v.is_number_integer()) throw MalformedResponse(std::string("field '") + key + "' must be an integer");
    return v.get<int>();
}

json box_to_json(const BoundingBox& box) { return json::array({box.x0, box.y0, box.x1, box.y1}); }

BoundingBox box_from_json(const json& j) {
    if (!j.is_array() || j.size() != 4) throw MalformedResponse("box must be an array of 4 numbers");
    for (const auto& v : j)
        if (!v.is_number()) throw MalformedResponse("box must be an array of 4 numbers");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

json detection_to_json(const Detection& d) {
    return {{"box", box_to_json(d.box)}, {"score", d.score}, {"label_index", d.label_index}};
}

Detection detection_from_json(const json& j) {
    Detection d;
    d.box = box_from_json(require(j, "box"));
    d.score = require_number(j, "score");
    d.label_index = require_int(j, "label_index");
    if (!std::isfinite(d.score)) throw MalformedResponse("score must be finite");
    return d;
}

json prompt_to_json(const MaskPrompt& p) {
    json j = {{"frame", p.frame_index}, {"box", box_to_json(p.box)}};
    j["point"] = p.point ? json::array({p.point->x, p.point->y}) : json(nullptr);
    return j;
}

MaskPrompt prompt_from_json(const json& j) {
    MaskPrompt p;
    p.frame_index = require_int(j, "frame");
    p.box = box_from_json(require(j, "box"));
    const auto it = j.find("point");
    if (it != j.end() && !it->is_null()) {
        if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number() || !(*it)[1].is_number())
            throw MalformedResponse("point must be null or [x, y]");
        p.point = Point2{(*it)[0].get<double>(), (*it)[1].get<double>()};
    }
    return p;
}

json masks_to_json(const MaskSeries& series) {
    json arr = json::array();
    for (const auto& [idx, mask] : series.masks) arr.push_back({{"frame", idx}, {"png_b64", mask_to_b64(mask)}});
    return {{"masks", arr}};
}

MaskSeries masks_from_json(const json& j) {
    const json& arr = require(j, "masks");
    if (!arr.is_array()) throw MalformedResponse("masks must be an array");
    MaskSeries series;
    for (const auto& m : arr) {
        const int frame = require_int(m, "frame");
        try {
            series.masks.emplace(frame, mask_from_b64(require_string(m, "png_b64")));
        } catch (const FormatError& e) {
            throw MalformedResponse(std::string("mask payload: ") + e.what());
        }
    }
    return series;
}

json capabilities_to_json(const ServerCapabilities& caps) {
    return {{"api_version", kApiVersion},
            {"supports_concurrent", caps.supports_concurrent},
            {"max_image_edge", caps.max_image_edge},
            {"model_name", caps.model_name},
            {"models", {{"flow", caps.flow_model}, {"detector", caps.detector_model}, {"segmenter", caps.segmenter_model}}}};
}

ServerCapabilities capabilities_from_json(const json& j) {
    ServerCapabilities caps;
    const json& sc = require(j, "supports_concurrent");
    if (!sc.is_boolean()) throw MalformedResponse("supports_concurrent must be a boolean");
    caps.supports_concurrent = sc.get<bool>();
    caps.max_image_edge = require_int(j, "max_image_edge");
    if (caps.max_image_edge < 64) throw MalformedResponse("max_image_edge must be >= 64");
    caps.model_name = require_string(j, "model_name");
    if (const auto it = j.find("models"); it != j.end() && it->is_object()) {
        caps.flow_model = it->value("flow", "");
        caps.detector_model = it->value("detector", "");
        caps.segmenter_model = it->value("segmenter", "");
    }
    return caps;
}

// ---------------------------------------------------------------- golden fixtures

Frame golden_frame(int width, int height, int seed, bool blue_square) {
    Frame f(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const auto v = static_cast<std::uint8_t>((x * 37 + y * 91 + seed * 53 + ((x * y) % 7) * 11) % 200 + 20);
            f.set(x, y, Rgb{v, static_cast<std::uint8_t>(v / 2 + 40), static_cast<std::uint8_t>(255 - v)});
        }
    if (blue_square) {
        for (int y = height / 4; y < height / 2; ++y)
            for (int x = width / 4; x < width / 2; ++x) f.set(x, y, Rgb{0, 0, 255});
        // keep the square the only strongly blue region
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                const bool inside = y >= height / 4 && y < height / 2 && x >= width / 4 && x < width / 2;
                if (!inside) {
                    const Rgb c = f.at(x, y);
                    f.set(x, y, Rgb{c.r, c.g, static_cast<std::uint8_t>(std::min<int>(c.b, c.r))});
                }
            }
    }
    return f;
}

GoldenCase golden_flow_request() {
    return {"flow", "POST", "/v1/flow",
            {{"prev_png_b64", frame_to_b64(golden_frame(16, 12, 1, false))},
             {"curr_png_b64", frame_to_b64(golden_frame(16, 12, 2, false))}}};
}

GoldenCase golden_detect_request() {
    return {"detect", "POST", "/v1/detect",
            {{"image_png_b64", frame_to_b64(golden_frame(32, 24, 3, true))},
             {"queries", build_prompt_set().queries()},
             {"threshold", 0.05}}};
}

GoldenCase golden_session_request() {
    json frames = json::array();
    for (int i = 0; i < 3; ++i) frames.push_back(frame_to_b64(golden_frame(32, 24, 10 + i, i == 0)));
    return {"session", "POST", "/v1/session", {{"frames", frames}}};
}

// ---------------------------------------------------------------- conformance check

bool ConformanceReport::all_passed() const {
    if (results.empty()) return false;
    for (const auto& r : results)
        if (!r.passed) return false;
    return true;
}

namespace {

struct Exchange {
    int status = 0;
    std::string body;
};

Exchange send(httplib::Client& cli, const GoldenCase& c, const std::string& request_id) {
    httplib::Headers headers = {{kRequestIdHeader, request_id}};
    httplib::Result res = c.method == "GET" ? cli.Get(c.path, headers)
                                            : cli.Post(c.path, headers, c.body.dump(), "application/json");
    if (!res) throw TransportError("request to " + c.path + " failed: " + httplib::to_string(res.error()));
    return {res->status, res->body};
}

json parse_ok(const Exchange& ex) {
    if (ex.status != 200) throw MalformedResponse("HTTP status " + std::to_string(ex.status));
    try {
        return json::parse(ex.body);
    } catch (const json::exception& e) {
        throw MalformedResponse(std::string("invalid JSON: ") + e.what());
    }
}

template <typename Fn>
ConformanceResult run_case(const std::string& endpoint, Fn&& fn) {
    ConformanceResult r{endpoint, false, ""};
    try {
        fn();
        r.passed = true;
        r.message = "ok";
    } catch (const std::exception& e) {
        r.message = e.what();
    }
    return r;
}

}  // namespace

ConformanceReport conformance_check(const std::string& base_url, double timeout_s) {
    httplib::Client cli(base_url);
    const auto secs = static_cast<time_t>(std::ceil(timeout_s));
    cli.set_connection_timeout(secs, 0);
    cli.set_read_timeout(secs, 0);
    cli.set_write_timeout(secs, 0);

    ConformanceReport report;
    int counter = 0;
    auto rid = [&counter] { return "conformance-" + std::to_string(++counter); };

    report.results.push_back(run_case("capabilities", [&] {
        const json j = parse_ok(send(cli, {"capabilities", "GET", "/v1/capabilities", {}}, rid()));
        capabilities_from_json(j);
    }));

    report.results.push_back(run_case("flow", [&] {
        const json j = parse_ok(send(cli, golden_flow_request(), rid()));
        FlowField flow;
        try {
            flow = flow_from_b64(require_string(j, "flow_b64"));
        } catch (const FormatError& e) {
            throw MalformedResponse(std::string("flow payload: ") + e.what());
        }
        if (flow.width() != 16 || flow.height() != 12) throw MalformedResponse("flow dimensions do not match input");
        if (!flow.all_finite()) throw MalformedResponse("flow contains non-finite values");
    }));

    const GoldenCase detect = golden_detect_request();
    report.results.push_back(run_case("detect", [&] {
        const json j = parse_ok(send(cli, detect, rid()));
        const json& dets = require(j, "detections");
        if (!dets.is_array()) throw MalformedResponse("detections must be an array");
        const auto n_queries = static_cast<int>(detect.body["queries"].size());
        for (const auto& dj : dets) {
            const Detection d = detection_from_json(dj);
            if (d.label_index < 0 || d.label_index >= n_queries) throw MalformedResponse("label_index out of range");
            if (d.score < 0.0 || d.score > 1.0) throw MalformedResponse("score outside [0, 1]");
            if (d.score < detect.body["threshold"].get<double>()) throw MalformedResponse("score below threshold");
            if (!d.box.valid() || d.box.x0 < 0 || d.box.y0 < 0 || d.box.x1 > 32 || d.box.y1 > 24)
                throw MalformedResponse("box outside image");
        }
    }));

    std::string session_id;
    report.results.push_back(run_case("session", [&] {
        const json j = parse_ok(send(cli, golden_session_request(), rid()));
        session_id = require_string(j, "session_id");
        if (session_id.empty()) throw MalformedResponse("empty session_id");
    }));

    report.results.push_back(run_case("track", [&] {
        if (session_id.empty()) throw MalformedResponse("no session to track");
        MaskPrompt prompt{0, {8, 6, 16, 12}, Point2{12, 9}};
        const GoldenCase c{"track", "POST", "/v1/track",
                           {{"session_id", session_id},
                            {"direction", "forward"},
                            {"prompts", json::array({prompt_to_json(prompt)})}}};
        const json j = parse_ok(send(cli, c, rid()));
        const MaskSeries series = masks_from_json(j);
        for (const auto& [idx, mask] : series.masks) {
            if (idx < 0 || idx >= 3) throw MalformedResponse("mask frame index out of range");
            if (mask.width() != 32 || mask.height() != 24) throw MalformedResponse("mask size does not match frames");
        }
    }));

    report.results.push_back(run_case("track_unknown_session", [&] {
        const GoldenCase c{"track", "POST", "/v1/track",
                           {{"session_id", "no-such-session"}, {"direction", "forward"}, {"prompts", json::array()}}};
        const Exchange ex = send(cli, c, rid());
        if (ex.status != 404) throw MalformedResponse("expected 404 for unknown session, got " + std::to_string(ex.status));
    }));

    report.results.push_back(run_case("request_id_dedup", [&] {
        const std::string id = rid();
        const Exchange a = send(cli, detect, id);
        const Exchange b = send(cli, detect, id);
        if (a.status != 200 || b.status != 200) throw MalformedResponse("detect failed");
        if (a.body != b.body) throw MalformedResponse("repeated X-Request-Id returned a different body");
    }));

    return report;
}

}  // namespace vcos::protocol
