#include "vcos/mock_providers.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "vcos/errors.hpp"
#include "vcos/image_codec.hpp"
#include "vcos/metrics.hpp"

namespace vcos {

namespace {

std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

BinaryMask shifted(const BinaryMask& m, int dx) {
    if (dx == 0) return m;
    BinaryMask out(m.width(), m.height());
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) {
            const int sx = x - dx;
            if (sx >= 0 && sx < m.width() && m.at(sx, y)) out.set(x, y, true);
        }
    return out;
}

bool boxes_overlap(const BoundingBox& a, const BoundingBox& b) {
    return std::min(a.x1, b.x1) > std::max(a.x0, b.x0) && std::min(a.y1, b.y1) > std::max(a.y0, b.y0);
}

void require_scene_frame(const OracleScene& scene, const Frame& f) {
    if (f.width() != scene.script.width || f.height() != scene.script.height)
        throw DimensionMismatch("frame does not match the oracle scene");
    if (f.index() < 0 || f.index() >= scene.script.frame_count)
        throw InvalidArgument("frame index " + std::to_string(f.index()) + " outside the oracle scene");
}

}  // namespace

void OracleKnobs::validate() const {
    if (!(miss_rate >= 0 && miss_rate <= 1)) throw ConfigError("oracle.miss_rate must be in [0, 1]");
    if (!(jitter >= 0)) throw ConfigError("oracle.jitter must be >= 0");
    if (!(score >= 0 && score <= 1)) throw ConfigError("oracle.score must be in [0, 1]");
    if (!(distractor_score >= 0 && distractor_score <= 1)) throw ConfigError("oracle.distractor_score must be in [0, 1]");
    if (!(drift >= 0)) throw ConfigError("oracle.drift must be >= 0");
    if (!(flow_noise >= 0)) throw ConfigError("oracle.flow_noise must be >= 0");
}

double seeded_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    const std::uint64_t h = mix(mix(mix(seed) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

std::shared_ptr<const OracleScene> make_oracle_scene(const SceneScript& script, std::uint64_t seed) {
    return std::make_shared<const OracleScene>(OracleScene{script, seed, generate(script, seed)});
}

std::shared_ptr<const OracleScene> load_oracle_scene(const fs::path& video_dir) {
    const auto bytes = read_file_bytes(video_dir / kSceneFile);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("invalid " + (video_dir / kSceneFile).string() + ": " + e.what());
    }
    std::uint64_t seed = 0;
    const SceneScript script = scene_from_json(j, &seed);
    return make_oracle_scene(script, seed);
}

double highlight_contrast(const Frame& image, const BinaryMask& mask) {
    double in = 0, out = 0;
    std::size_t n_in = 0, n_out = 0;
    for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x) {
            const Rgb c = image.at(x, y);
            const double blue = c.b - (c.r + c.g) / 2.0;
            if (mask.at(x, y)) {
                in += blue;
                ++n_in;
            } else {
                out += blue;
                ++n_out;
            }
        }
    if (n_in == 0) return 0.0;
    return in / static_cast<double>(n_in) - (n_out ? out / static_cast<double>(n_out) : 0.0);
}

BinaryMask box_mask(int width, int height, const BoundingBox& box, int shift_x) {
    BinaryMask m(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            if (box.contains(x - shift_x, y)) m.set(x, y, true);
    return m;
}

// ---------------------------------------------------------------- oracle flow

OracleFlowProvider::OracleFlowProvider(std::shared_ptr<const OracleScene> scene, OracleKnobs knobs)
    : scene_(std::move(scene)), knobs_(knobs) {
    knobs_.validate();
}

FlowField OracleFlowProvider::compute(const Frame& prev, const Frame& curr) {
    require_scene_frame(*scene_, prev);
    require_scene_frame(*scene_, curr);
    const int a = prev.index();
    const int b = curr.index();
    FlowField flow = b == a + 1 ? scene_->rendered.flows[static_cast<std::size_t>(a)]
                                : analytic_flow(scene_->script, a, b);
    if (knobs_.flow_noise > 0) {
        std::mt19937_64 rng(mix(knobs_.seed ^ mix(scene_->seed) ^ mix(static_cast<std::uint64_t>(a) * 1000003 + static_cast<std::uint64_t>(b))));
        std::normal_distribution<double> noise(0.0, knobs_.flow_noise);
        for (auto& v : flow.data()) v = static_cast<float>(v + noise(rng));
    }
    return flow;
}

// ---------------------------------------------------------------- oracle detector

OracleDetectorProvider::OracleDetectorProvider(std::shared_ptr<const OracleScene> scene, OracleKnobs knobs)
    : scene_(std::move(scene)), knobs_(knobs) {
    knobs_.validate();
    const SceneScript& s = scene_->script;
    for (int t = 0; t < s.frame_count; ++t) {
        BinaryMask m(s.width, s.height);
        const AffineTransform& cam = s.camera[static_cast<std::size_t>(t)];
        const BinaryMask& obj = scene_->rendered.gt.masks.at(t);
        for (int y = 0; y < s.height; ++y)
            for (int x = 0; x < s.width; ++x) {
                if (obj.at(x, y)) continue;
                const Point2 w = cam.apply({static_cast<double>(x), static_cast<double>(y)});
                for (const auto& d : s.distractors) {
                    const double dx = w.x - d.center.x;
                    const double dy = w.y - d.center.y;
                    const bool inside = d.shape == Shape::Ellipse
                                            ? (dx * dx) / (d.width * d.width / 4) + (dy * dy) / (d.height * d.height / 4) <= 1.0
                                            : std::abs(dx) < d.width / 2 && std::abs(dy) < d.height / 2;
                    if (inside) m.set(x, y, true);
                }
            }
        distractor_masks_.push_back(std::move(m));
    }
}

bool OracleDetectorProvider::fires_on(int frame) const {
    if (knobs_.fire_frames)
        return std::find(knobs_.fire_frames->begin(), knobs_.fire_frames->end(), frame) != knobs_.fire_frames->end();
    return seeded_uniform(knobs_.seed ^ mix(scene_->seed), 0xde7ec7, static_cast<std::uint64_t>(frame)) >=
           knobs_.miss_rate;
}

std::vector<Detection> OracleDetectorProvider::detect(const Frame& image, const std::vector<std::string>& queries,
                                                      double threshold) {
    if (queries.empty()) throw InvalidArgument("detector queries must be non-empty");
    require_scene_frame(*scene_, image);
    const int t = image.index();
    std::vector<Detection> out;

    const BinaryMask& gt = scene_->rendered.gt.masks.at(t);
    const auto gt_box = scene_->rendered.gt.boxes.find(t);
    if (fires_on(t) && gt_box != scene_->rendered.gt.boxes.end() &&
        highlight_contrast(image, gt) >= knobs_.min_highlight) {
        BoundingBox b = gt_box->second;
        const int j = static_cast<int>(std::floor(knobs_.jitter));
        if (j > 0) {
            double* edges[4] = {&b.x0, &b.y0, &b.x1, &b.y1};
            for (int e = 0; e < 4; ++e) {
                const double u = seeded_uniform(knobs_.seed ^ mix(scene_->seed), 0x717e5 + static_cast<std::uint64_t>(e),
                                                static_cast<std::uint64_t>(t));
                *edges[e] += std::min(j, static_cast<int>(std::floor(u * (2 * j + 1)))) - j;
            }
        }
        b.x0 = std::clamp(b.x0, 0.0, static_cast<double>(image.width()));
        b.x1 = std::clamp(b.x1, 0.0, static_cast<double>(image.width()));
        b.y0 = std::clamp(b.y0, 0.0, static_cast<double>(image.height()));
        b.y1 = std::clamp(b.y1, 0.0, static_cast<double>(image.height()));
        if (b.valid()) out.push_back({b, knobs_.score, kPositiveLabel});
    }

    // Distractors land on the first negative query when there is one, otherwise on the positive.
    if (const auto dbox = largest_component_box(distractor_masks_[static_cast<std::size_t>(t)]))
        out.push_back({*dbox, knobs_.distractor_score, queries.size() > 1 ? 1 : kPositiveLabel});

    std::erase_if(out, [threshold](const Detection& d) { return d.score < threshold; });
    return out;
}

// ---------------------------------------------------------------- sessions

std::string SessionSegmenter::open_session(const VideoSequence& video) {
    std::lock_guard lock(mu_);
    const std::string id = session_prefix() + "-" + std::to_string(++counter_);
    sessions_[id] = {video.size(), video.width(), video.height()};
    return id;
}

MaskSeries SessionSegmenter::track(const std::string& session, const PromptTimeline& prompts, Direction dir) {
    Session s;
    {
        std::lock_guard lock(mu_);
        const auto it = sessions_.find(session);
        if (it == sessions_.end()) throw UnknownReference("unknown session '" + session + "'");
        s = it->second;
    }
    prompts.validate(s.frame_count);
    auto original = [&](int k) { return dir == Direction::Forward ? k : s.frame_count - 1 - k; };

    MaskSeries out;
    if (prompts.empty()) return out;
    std::size_t p = 0;
    for (int k = prompts.prompts.front().frame_index; k < s.frame_count; ++k) {
        while (p + 1 < prompts.size() && prompts.prompts[p + 1].frame_index <= k) ++p;
        MaskPrompt prompt = prompts.prompts[p];
        const int distance = k - prompt.frame_index;
        prompt.frame_index = original(prompt.frame_index);
        out.masks.emplace(k, mask_for(s, prompt, original(k), distance));
    }
    return out;
}

void SessionSegmenter::close_session(const std::string& session) {
    std::lock_guard lock(mu_);
    sessions_.erase(session);
}

std::size_t SessionSegmenter::open_sessions() const {
    std::lock_guard lock(mu_);
    return sessions_.size();
}

// ---------------------------------------------------------------- oracle tracker

OracleTrackerProvider::OracleTrackerProvider(std::shared_ptr<const OracleScene> scene, OracleKnobs knobs)
    : scene_(std::move(scene)), knobs_(knobs) {
    knobs_.validate();
}

std::string OracleTrackerProvider::open_session(const VideoSequence& video) {
    if (video.width() != scene_->script.width || video.height() != scene_->script.height ||
        video.size() != scene_->script.frame_count)
        throw DimensionMismatch("session video does not match the oracle scene");
    return SessionSegmenter::open_session(video);
}

BinaryMask OracleTrackerProvider::mask_for(const Session& s, const MaskPrompt& prompt, int frame, int distance) {
    const int shift = static_cast<int>(std::lround(knobs_.drift * distance));
    const auto& gt = scene_->rendered.gt;
    bool on_object = false;
    if (const auto it = gt.boxes.find(prompt.frame_index); it != gt.boxes.end()) {
        on_object = boxes_overlap(prompt.box, it->second);
        if (!on_object && prompt.point) {
            const int px = static_cast<int>(std::lround(prompt.point->x));
            const int py = static_cast<int>(std::lround(prompt.point->y));
            const BinaryMask& m = gt.masks.at(prompt.frame_index);
            on_object = px >= 0 && py >= 0 && px < m.width() && py < m.height() && m.at(px, py);
        }
    }
    if (on_object) return shifted(gt.masks.at(frame), shift);
    return box_mask(s.width, s.height, prompt.box, shift);
}

// ---------------------------------------------------------------- generic mocks

FlowField PatternFlowProvider::compute(const Frame& prev, const Frame& curr) {
    if (!prev.same_size(curr)) throw DimensionMismatch("flow frames differ in size");
    const auto a = prev.luma();
    const auto b = curr.luma();
    double diff = 0;
    for (std::size_t p = 0; p < a.size(); ++p) diff += std::abs(static_cast<double>(b[p]) - a[p]);
    const float s = static_cast<float>(diff / static_cast<double>(a.size()) / 16.0);
    FlowField flow(prev.width(), prev.height());
    for (int y = 0; y < prev.height(); ++y)
        for (int x = 0; x < prev.width(); ++x) {
            const float dx = (static_cast<float>(x % 7) - 3.0f) * 0.37f + static_cast<float>(y) * 1.0e-3f;
            const float dy = (static_cast<float>(y % 5) - 2.0f) * -0.61f + 1.0f / 3.0f;
            flow.set(static_cast<std::size_t>(y) * prev.width() + x, dx * s, dy * s);
        }
    return flow;
}

std::vector<Detection> HighlightDetectorProvider::detect(const Frame& image, const std::vector<std::string>& queries,
                                                         double threshold) {
    if (queries.empty()) throw InvalidArgument("detector queries must be non-empty");
    BinaryMask blue(image.width(), image.height());
    for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x) {
            const Rgb c = image.at(x, y);
            if (c.b - std::max(c.r, c.g) > blue_margin_) blue.set(x, y, true);
        }
    std::vector<Detection> out;
    const auto box = largest_component_box(blue);
    if (!box || box->area() < 4) return out;
    std::size_t inside = 0;
    for (int y = static_cast<int>(box->y0); y < static_cast<int>(box->y1); ++y)
        for (int x = static_cast<int>(box->x0); x < static_cast<int>(box->x1); ++x) inside += blue.at(x, y);
    const double score = 0.25 + 0.5 * static_cast<double>(inside) / box->area();
    if (score >= threshold) out.push_back({*box, score, kPositiveLabel});
    return out;
}

BinaryMask BoxPropagationSegmenter::mask_for(const Session& s, const MaskPrompt& prompt, int, int) {
    return box_mask(s.width, s.height, prompt.box);
}

FlowField FileFlowProvider::compute(const Frame& prev, const Frame& curr) {
    if (!prev.same_size(curr)) throw DimensionMismatch("flow frames differ in size");
    if (curr.index() != prev.index() + 1)
        throw InvalidArgument("flow files only cover consecutive forward pairs");
    FlowField flow = read_flow_file(dir_ / frame_filename(prev.index(), ".flo"));
    if (flow.width() != prev.width() || flow.height() != prev.height())
        throw DimensionMismatch("flow file does not match the frame size");
    return flow;
}

ProviderSet make_generic_mocks() {
    return {std::make_shared<PatternFlowProvider>(), std::make_shared<HighlightDetectorProvider>(),
            std::make_shared<BoxPropagationSegmenter>()};
}

}  // namespace vcos
