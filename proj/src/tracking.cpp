#include "vcos/tracking.hpp"

#include <algorithm>
#include <cmath>

#include "vcos/errors.hpp"
#include "vcos/providers.hpp"

namespace vcos {

const char* to_string(Direction d) { return d == Direction::Forward ? "forward" : "backward"; }

Direction parse_direction(const std::string& s) {
    if (s == "forward") return Direction::Forward;
    if (s == "backward") return Direction::Backward;
    throw InvalidArgument("unknown direction '" + s + "'");
}

PromptMode parse_prompt_mode(const std::string& s) {
    if (s == "box" || s == "box_only" || s == "BoxOnly") return PromptMode::BoxOnly;
    if (s == "box_point" || s == "box_plus_point" || s == "BoxPlusPoint") return PromptMode::BoxPlusPoint;
    throw ConfigError("unknown prompt mode '" + s + "'");
}

const char* to_string(PromptMode m) { return m == PromptMode::BoxOnly ? "box" : "box_point"; }

void PromptTimeline::validate(int frame_count) const {
    int last = -1;
    for (const auto& p : prompts) {
        if (p.frame_index <= last) throw InvalidArgument("prompt frame indices must be strictly increasing");
        if (p.frame_index >= frame_count) throw InvalidArgument("prompt frame index beyond video length");
        if (!p.box.valid()) throw InvalidArgument("prompt box is empty");
        if (p.point && !(p.point->x >= p.box.x0 && p.point->x <= p.box.x1 && p.point->y >= p.box.y0 &&
                         p.point->y <= p.box.y1))
            throw InvalidArgument("prompt point lies outside its box");
        last = p.frame_index;
    }
}

PromptTimeline PromptTimeline::reversed(int frame_count) const {
    PromptTimeline out;
    out.prompts.reserve(prompts.size());
    for (auto it = prompts.rbegin(); it != prompts.rend(); ++it) {
        MaskPrompt p = *it;
        p.frame_index = frame_count - 1 - p.frame_index;
        out.prompts.push_back(p);
    }
    return out;
}

std::optional<Point2> center_of_mass(const IntensityMap& intensity, const BoundingBox& box) {
    const int x_begin = std::max(0, static_cast<int>(std::ceil(box.x0)));
    const int y_begin = std::max(0, static_cast<int>(std::ceil(box.y0)));
    const int x_end = std::min(intensity.width(), static_cast<int>(std::ceil(box.x1)));
    const int y_end = std::min(intensity.height(), static_cast<int>(std::ceil(box.y1)));
    double total = 0, sx = 0, sy = 0;
    for (int y = y_begin; y < y_end; ++y)
        for (int x = x_begin; x < x_end; ++x) {
            const double v = intensity.at(x, y);
            total += v;
            sx += v * x;
            sy += v * y;
        }
    if (total <= 0) return std::nullopt;
    return Point2{sx / total, sy / total};
}

PromptTimeline assemble_prompts(const std::vector<std::optional<Detection>>& detections,
                                const std::vector<IntensityMap>& intensities, PromptMode mode) {
    PromptTimeline timeline;
    for (std::size_t i = 0; i < detections.size(); ++i) {
        if (!detections[i]) continue;
        MaskPrompt prompt;
        prompt.frame_index = static_cast<int>(i);
        prompt.box = detections[i]->box;
        if (mode == PromptMode::BoxPlusPoint) {
            std::optional<Point2> com;
            if (i < intensities.size()) com = center_of_mass(intensities[i], prompt.box);
            prompt.point = com.value_or(Point2{(prompt.box.x0 + prompt.box.x1) / 2, (prompt.box.y0 + prompt.box.y1) / 2});
        }
        timeline.prompts.push_back(prompt);
    }
    return timeline;
}

MaskSeries reverse_series(const MaskSeries& series, int frame_count) {
    MaskSeries out;
    out.video_id = series.video_id;
    for (const auto& [idx, mask] : series.masks) out.masks.emplace(frame_count - 1 - idx, mask);
    return out;
}

MaskSeries propagate(SegmenterProvider& provider, const std::string& session, const VideoSequence& seq,
                     const PromptTimeline& timeline, Direction dir) {
    MaskSeries result;
    result.video_id = seq.source_id();
    if (timeline.empty()) return result;
    timeline.validate(seq.size());

    const int t = seq.size();
    const PromptTimeline sent = dir == Direction::Forward ? timeline : timeline.reversed(t);
    MaskSeries raw = provider.track(session, sent, dir);
    if (dir == Direction::Backward) raw = reverse_series(raw, t);

    for (auto& [idx, mask] : raw.masks) {
        if (idx < 0 || idx >= t) continue;
        if (mask.width() != seq.width() || mask.height() != seq.height())
            throw DimensionMismatch("segmenter mask does not match frame size");
        result.masks.emplace(idx, std::move(mask));
    }
    return result;
}

MaskSeries propagate(SegmenterProvider& provider, const VideoSequence& seq, const PromptTimeline& timeline,
                     Direction dir) {
    if (timeline.empty()) return MaskSeries{seq.source_id(), {}};
    const std::string session = provider.open_session(seq);
    try {
        MaskSeries out = propagate(provider, session, seq, timeline, dir);
        provider.close_session(session);
        return out;
    } catch (...) {
        try {
            provider.close_session(session);
        } catch (...) {
        }
        throw;
    }
}

MaskSeries merge_bidirectional(const MaskSeries& forward, const MaskSeries& backward) {
    MaskSeries out = forward;
    if (out.video_id.empty()) out.video_id = backward.video_id;
    for (const auto& [idx, mask] : backward.masks) {
        auto it = out.masks.find(idx);
        if (it == out.masks.end()) {
            out.masks.emplace(idx, mask);
            continue;
        }
        if (!it->second.same_size(mask)) throw DimensionMismatch("merged masks differ in size");
        for (std::size_t p = 0; p < mask.pixel_count(); ++p)
            if (mask[p]) it->second.set(p, true);
    }
    out.validate();
    return out;
}

}  // namespace vcos
