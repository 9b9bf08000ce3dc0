#pragma once

// Offline provider implementations.
//
// Oracles know the synthetic scene and answer from its exact geometry, with
// seeded, deterministic degradations. They identify frames by Frame::index,
// so they are meant to run in-process. The generic mocks need no scene and
// back the standalone mock server.

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "vcos/providers.hpp"
#include "vcos/synthetic.hpp"

namespace vcos {

struct OracleKnobs {
    double miss_rate = 0.0;      // fraction of frames on which the detector stays silent
    double jitter = 0.0;         // max box edge perturbation, pixels
    double score = 0.5;          // planted detection score
    double drift = 0.0;          // tracker drift, pixels per frame away from the prompt
    double flow_noise = 0.0;     // gaussian sigma added to analytic flow
    std::uint64_t seed = 7;
    double min_highlight = 8.0;  // blueness contrast the detector needs to see the object
    double distractor_score = 0.3;
    std::optional<std::vector<int>> fire_frames;  // when set, the detector fires only here

    void validate() const;
};

struct OracleScene {
    SceneScript script;
    std::uint64_t seed = 0;
    SyntheticVideo rendered;
};

std::shared_ptr<const OracleScene> make_oracle_scene(const SceneScript& script, std::uint64_t seed);
// Reads <video_dir>/scene.json as written by write_synthetic_dataset.
std::shared_ptr<const OracleScene> load_oracle_scene(const fs::path& video_dir);

// Mean of B - (R + G) / 2 over `mask` minus the same mean over its complement.
double highlight_contrast(const Frame& image, const BinaryMask& mask);

// Deterministic uniform draw in [0, 1) keyed by (seed, a, b).
double seeded_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

class OracleFlowProvider : public FlowProvider {
public:
    OracleFlowProvider(std::shared_ptr<const OracleScene> scene, OracleKnobs knobs);
    FlowField compute(const Frame& prev, const Frame& curr) override;
    ProviderCapabilities capabilities() override { return {true, 4096, "oracle-flow"}; }

private:
    std::shared_ptr<const OracleScene> scene_;
    OracleKnobs knobs_;
};

class OracleDetectorProvider : public DetectorProvider {
public:
    OracleDetectorProvider(std::shared_ptr<const OracleScene> scene, OracleKnobs knobs);
    std::vector<Detection> detect(const Frame& image, const std::vector<std::string>& queries,
                                  double threshold) override;
    ProviderCapabilities capabilities() override { return {true, 4096, "oracle-detector"}; }

    // Misses are keyed by (knobs seed, scene seed, frame).
    bool fires_on(int frame) const;

private:
    std::shared_ptr<const OracleScene> scene_;
    OracleKnobs knobs_;
    std::vector<BinaryMask> distractor_masks_;  // per frame, union of visible distractors
};

// Shared session bookkeeping and reachability rule: playback position k gets a
// mask iff some prompt sits at or before k; the nearest such prompt drives it.
class SessionSegmenter : public SegmenterProvider {
public:
    std::string open_session(const VideoSequence& video) override;
    MaskSeries track(const std::string& session, const PromptTimeline& prompts, Direction dir) override;
    void close_session(const std::string& session) override;

    std::size_t open_sessions() const;

protected:
    struct Session {
        int frame_count = 0;
        int width = 0;
        int height = 0;
    };
    // Mask at original frame `frame` driven by `prompt` (given in original frame indices), `distance` frames away.
    virtual BinaryMask mask_for(const Session& s, const MaskPrompt& prompt, int frame, int distance) = 0;
    virtual std::string session_prefix() const = 0;

private:
    mutable std::mutex mu_;
    std::map<std::string, Session> sessions_;
    long counter_ = 0;
};

class OracleTrackerProvider : public SessionSegmenter {
public:
    OracleTrackerProvider(std::shared_ptr<const OracleScene> scene, OracleKnobs knobs);
    std::string open_session(const VideoSequence& video) override;
    ProviderCapabilities capabilities() override { return {true, 4096, "oracle-tracker"}; }

protected:
    BinaryMask mask_for(const Session& s, const MaskPrompt& prompt, int frame, int distance) override;
    std::string session_prefix() const override { return "oracle"; }

private:
    std::shared_ptr<const OracleScene> scene_;
    OracleKnobs knobs_;
};

// Deterministic, input-dependent field with non-trivial float values; zero for identical frames.
class PatternFlowProvider : public FlowProvider {
public:
    FlowField compute(const Frame& prev, const Frame& curr) override;
    ProviderCapabilities capabilities() override { return {true, 4096, "mock-pattern-flow"}; }
};

// Boxes the largest strongly blue blob; appearance-only, so it needs the highlight.
class HighlightDetectorProvider : public DetectorProvider {
public:
    explicit HighlightDetectorProvider(int blue_margin = 60) : blue_margin_(blue_margin) {}
    std::vector<Detection> detect(const Frame& image, const std::vector<std::string>& queries,
                                  double threshold) override;
    ProviderCapabilities capabilities() override { return {true, 4096, "mock-highlight-detector"}; }

private:
    int blue_margin_;
};

// Propagates the prompt box itself as the mask.
class BoxPropagationSegmenter : public SessionSegmenter {
public:
    ProviderCapabilities capabilities() override { return {true, 4096, "mock-box-segmenter"}; }

protected:
    BinaryMask mask_for(const Session& s, const MaskPrompt& prompt, int frame, int distance) override;
    std::string session_prefix() const override { return "box"; }
};

// Reads <dir>/<prev index>.flo; only consecutive forward pairs are available.
class FileFlowProvider : public FlowProvider {
public:
    explicit FileFlowProvider(fs::path dir) : dir_(std::move(dir)) {}
    FlowField compute(const Frame& prev, const Frame& curr) override;
    ProviderCapabilities capabilities() override { return {true, 1 << 16, "flow-files"}; }

private:
    fs::path dir_;
};

// Pixels whose centers fall inside `box`, shifted right by `shift_x`.
BinaryMask box_mask(int width, int height, const BoundingBox& box, int shift_x = 0);

ProviderSet make_generic_mocks();

}  // namespace vcos
