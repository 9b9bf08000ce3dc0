#include "vcos/provider_server.hpp"

#include <algorithm>

#include <httplib.h>

#include "vcos/errors.hpp"

namespace vcos {

using nlohmann::json;
namespace proto = vcos::protocol;

namespace {

json error_body(const std::string& message) { return {{"error", message}}; }

}  // namespace

ProviderServer::ProviderServer(ProviderSet providers, proto::ServerCapabilities caps, ServerOptions options)
    : providers_(std::move(providers)), caps_(std::move(caps)), options_(options),
      server_(std::make_unique<httplib::Server>()) {
    if (options_.session_capacity == 0) throw InvalidArgument("session capacity must be positive");
    install_routes();
}

ProviderServer::~ProviderServer() { stop(); }

void ProviderServer::install_routes() {
    auto bind = [this](const std::string& route) {
        return [this, route](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.get_header_value(proto::kRequestIdHeader);
            Reply reply;
            bool cached = false;
            if (!id.empty()) {
                std::lock_guard lock(dedup_mu_);
                if (auto it = dedup_.find(route + "#" + id); it != dedup_.end()) {
                    reply = it->second;
                    cached = true;
                }
            }
            if (!cached) {
                reply = handle(route, req.body);
                if (!id.empty()) {
                    std::lock_guard lock(dedup_mu_);
                    const std::string key = route + "#" + id;
                    if (dedup_.emplace(key, reply).second) {
                        dedup_order_.push_back(key);
                        while (dedup_order_.size() > options_.dedup_capacity) {
                            dedup_.erase(dedup_order_.front());
                            dedup_order_.pop_front();
                        }
                    } else {
                        reply = dedup_[key];  // a concurrent duplicate won the race
                    }
                }
            }
            res.status = reply.status;
            res.set_content(reply.body, "application/json");
        };
    };
    server_->Get("/v1/capabilities", bind("capabilities"));
    server_->Post("/v1/flow", bind("flow"));
    server_->Post("/v1/detect", bind("detect"));
    server_->Post("/v1/session", bind("session"));
    server_->Post("/v1/track", bind("track"));
}

ProviderServer::Reply ProviderServer::handle(const std::string& route, const std::string& body) {
    try {
        return dispatch(route, body);
    } catch (const json::exception& e) {
        return {400, error_body(std::string("malformed request: ") + e.what()).dump()};
    } catch (const UnknownReference& e) {
        return {404, error_body(e.what()).dump()};
    } catch (const MalformedResponse& e) {
        return {400, error_body(e.what()).dump()};
    } catch (const FormatError& e) {
        return {400, error_body(e.what()).dump()};
    } catch (const InvalidArgument& e) {
        return {400, error_body(e.what()).dump()};
    } catch (const DimensionMismatch& e) {
        return {400, error_body(e.what()).dump()};
    } catch (const std::exception& e) {
        return {500, error_body(e.what()).dump()};
    }
}

ProviderServer::Reply ProviderServer::dispatch(const std::string& route, const std::string& body) {
    if (route == "capabilities") return {200, proto::capabilities_to_json(caps_).dump()};

    const json req = json::parse(body);
    if (route == "flow") {
        if (!providers_.flow) return {503, error_body("flow model not loaded").dump()};
        const Frame prev = proto::frame_from_b64(proto::require_string(req, "prev_png_b64"), 0);
        const Frame curr = proto::frame_from_b64(proto::require_string(req, "curr_png_b64"), 1);
        if (!prev.same_size(curr)) throw DimensionMismatch("flow frames differ in size");
        std::lock_guard lock(flow_mu_);
        return {200, json{{"flow_b64", proto::flow_to_b64(providers_.flow->compute(prev, curr))}}.dump()};
    }
    if (route == "detect") {
        if (!providers_.detector) return {503, error_body("detector model not loaded").dump()};
        const Frame image = proto::frame_from_b64(proto::require_string(req, "image_png_b64"));
        const json& q = proto::require(req, "queries");
        if (!q.is_array() || q.empty()) throw InvalidArgument("queries must be a non-empty array");
        std::vector<std::string> queries;
        for (const auto& s : q) {
            if (!s.is_string()) throw InvalidArgument("queries must be strings");
            queries.push_back(s.get<std::string>());
        }
        const double threshold = proto::require_number(req, "threshold");
        std::vector<Detection> dets;
        {
            std::lock_guard lock(detect_mu_);
            dets = providers_.detector->detect(image, queries, threshold);
        }
        json arr = json::array();
        for (const auto& d : dets)
            if (d.score >= threshold) arr.push_back(proto::detection_to_json(d));
        return {200, json{{"detections", arr}}.dump()};
    }
    if (route == "session") {
        if (!providers_.segmenter) return {503, error_body("segmenter model not loaded").dump()};
        const json& arr = proto::require(req, "frames");
        if (!arr.is_array()) throw InvalidArgument("frames must be an array");
        std::vector<Frame> frames;
        for (const auto& f : arr) {
            if (!f.is_string()) throw InvalidArgument("frames must be base64 strings");
            frames.push_back(proto::frame_from_b64(f.get<std::string>(), static_cast<int>(frames.size())));
        }
        const VideoSequence video(std::move(frames), "session");
        std::string id;
        {
            std::lock_guard lock(segment_mu_);
            id = providers_.segmenter->open_session(video);
        }
        std::string evicted;
        {
            std::lock_guard lock(session_mu_);
            session_lru_.push_front(id);
            session_frames_[id] = video.size();
            if (session_lru_.size() > options_.session_capacity) {
                evicted = session_lru_.back();
                session_lru_.pop_back();
                session_frames_.erase(evicted);
            }
        }
        if (!evicted.empty()) {
            std::lock_guard lock(segment_mu_);
            providers_.segmenter->close_session(evicted);
        }
        return {200, json{{"session_id", id}}.dump()};
    }
    if (route == "track") {
        if (!providers_.segmenter) return {503, error_body("segmenter model not loaded").dump()};
        const std::string id = proto::require_string(req, "session_id");
        const Direction dir = parse_direction(proto::require_string(req, "direction"));
        const json& arr = proto::require(req, "prompts");
        if (!arr.is_array()) throw InvalidArgument("prompts must be an array");
        PromptTimeline timeline;
        for (const auto& p : arr) timeline.prompts.push_back(proto::prompt_from_json(p));
        int frame_count = 0;
        {
            std::lock_guard lock(session_mu_);
            const auto it = session_frames_.find(id);
            if (it == session_frames_.end()) throw UnknownReference("unknown session '" + id + "'");
            frame_count = it->second;
            session_lru_.remove(id);
            session_lru_.push_front(id);
        }
        timeline.validate(frame_count);
        MaskSeries series;
        {
            std::lock_guard lock(segment_mu_);
            series = providers_.segmenter->track(id, timeline, dir);
        }
        return {200, proto::masks_to_json(series).dump()};
    }
    return {404, error_body("no route " + route).dump()};
}

int ProviderServer::start(const std::string& host, int port) {
    host_ = host;
    port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (port_ < 0) throw IoError("cannot bind provider server to " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port_;
}

void ProviderServer::listen_blocking(const std::string& host, int port) {
    host_ = host;
    port_ = port;
    if (!server_->listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
}

void ProviderServer::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

std::string ProviderServer::base_url() const { return "http://" + host_ + ":" + std::to_string(port_); }

std::size_t ProviderServer::live_sessions() const {
    std::lock_guard lock(session_mu_);
    return session_frames_.size();
}

}  // namespace vcos
