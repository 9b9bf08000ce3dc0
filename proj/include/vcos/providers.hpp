#pragma once

// Interfaces for the three neural capabilities the pipeline depends on:
// dense optical flow, open-vocabulary detection, and promptable video
// segmentation. Implementations are HTTP clients (http_providers.hpp) or
// the in-process oracles and mocks used for offline testing.

#include <memory>
#include <string>
#include <vector>

#include "vcos/detection.hpp"
#include "vcos/tracking.hpp"
#include "vcos/video_model.hpp"

namespace vcos {

struct ProviderCapabilities {
    bool supports_concurrent = true;
    int max_image_edge = 4096;
    std::string model_name;
};

class FlowProvider {
public:
    virtual ~FlowProvider() = default;
    // Forward flow from prev to curr, same dimensions as the inputs.
    virtual FlowField compute(const Frame& prev, const Frame& curr) = 0;
    virtual ProviderCapabilities capabilities() = 0;
};

class DetectorProvider {
public:
    virtual ~DetectorProvider() = default;
    // Detections scoring at least `threshold`; label_index indexes `queries`.
    virtual std::vector<Detection> detect(const Frame& image, const std::vector<std::string>& queries,
                                          double threshold) = 0;
    virtual ProviderCapabilities capabilities() = 0;
};

class SegmenterProvider {
public:
    virtual ~SegmenterProvider() = default;
    virtual std::string open_session(const VideoSequence& video) = 0;
    // Propagates over the session video played in `dir` order. Prompt frame
    // indices and returned mask indices are positions in that playback order,
    // so for Backward, index i refers to original frame t-1-i.
    virtual MaskSeries track(const std::string& session, const PromptTimeline& prompts, Direction dir) = 0;
    virtual void close_session(const std::string& session) = 0;
    virtual ProviderCapabilities capabilities() = 0;
};

struct ProviderSet {
    std::shared_ptr<FlowProvider> flow;
    std::shared_ptr<DetectorProvider> detector;
    std::shared_ptr<SegmenterProvider> segmenter;
};

}  // namespace vcos
