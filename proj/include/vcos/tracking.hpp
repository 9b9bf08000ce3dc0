#pragma once

// Turns per-frame detections into segmenter prompts and propagates them
// through a promptable video segmenter, forward and over the reversed video,
// merging the two passes with a per-pixel OR.

#include <optional>
#include <vector>

#include "vcos/camera_motion.hpp"
#include "vcos/detection.hpp"
#include "vcos/motion_cues.hpp"
#include "vcos/video_model.hpp"

namespace vcos {

class SegmenterProvider;

enum class Direction { Forward, Backward };

const char* to_string(Direction d);
Direction parse_direction(const std::string& s);

struct MaskPrompt {
    int frame_index = 0;
    BoundingBox box;
    std::optional<Point2> point;  // positive click

    friend bool operator==(const MaskPrompt& a, const MaskPrompt& b) {
        const bool same_point = a.point.has_value() == b.point.has_value() &&
                                (!a.point || (a.point->x == b.point->x && a.point->y == b.point->y));
        return a.frame_index == b.frame_index && a.box == b.box && same_point;
    }
};

// Prompts ordered by strictly increasing frame index.
struct PromptTimeline {
    std::vector<MaskPrompt> prompts;

    bool empty() const { return prompts.empty(); }
    std::size_t size() const { return prompts.size(); }
    void validate(int frame_count) const;
    // Index i becomes t-1-i; order is reversed so indices stay increasing.
    PromptTimeline reversed(int frame_count) const;
};

enum class PromptMode { BoxOnly, BoxPlusPoint };

PromptMode parse_prompt_mode(const std::string& s);
const char* to_string(PromptMode m);

// Intensity-weighted mean pixel position inside `box`; pixel centers sit at integer coordinates.
std::optional<Point2> center_of_mass(const IntensityMap& intensity, const BoundingBox& box);

PromptTimeline assemble_prompts(const std::vector<std::optional<Detection>>& detections,
                                const std::vector<IntensityMap>& intensities, PromptMode mode);

// Index i becomes t-1-i for every mask.
MaskSeries reverse_series(const MaskSeries& series, int frame_count);

MaskSeries propagate(SegmenterProvider& provider, const std::string& session, const VideoSequence& seq,
                     const PromptTimeline& timeline, Direction dir);

// Opens a session for `seq`, propagates, and closes it.
MaskSeries propagate(SegmenterProvider& provider, const VideoSequence& seq, const PromptTimeline& timeline,
                     Direction dir);

MaskSeries merge_bidirectional(const MaskSeries& forward, const MaskSeries& backward);

}  // namespace vcos
