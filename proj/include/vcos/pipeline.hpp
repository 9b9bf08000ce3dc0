#pragma once

// Per-video pipeline (route -> cues -> highlight -> detect -> track -> merge),
// threshold sweeps over a dataset, and report emission.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vcos/config.hpp"
#include "vcos/metrics.hpp"
#include "vcos/providers.hpp"

namespace vcos {

// Builds providers from the `providers.*` scheme strings:
//   mock:oracle     oracle reading <video>/scene.json
//   mock:pattern    (flow) deterministic pattern field
//   mock:highlight  (detector) blue-blob detector
//   mock:box        (segmenter) box propagation
//   files:<subdir>  (flow) <video>/<subdir>/<frame>.flo
//   http://...      provider server
// HTTP clients are shared across videos; providers that do not support
// concurrent calls are serialized.
class ProviderFactory {
public:
    explicit ProviderFactory(const PipelineConfig& config);

    ProviderSet for_video(const fs::path& video_dir) const;
    // Model name per role, for the run record.
    std::map<std::string, std::string> model_names() const;

private:
    PipelineConfig config_;
    ProviderSet shared_;
    std::map<std::string, std::string> names_;
};

struct CueResult {
    std::string route = "none";  // flow | bgs | none
    std::optional<RouteDecision> decision;
    std::vector<IntensityMap> intensities;
    std::vector<HighlightedFrame> highlighted;
};

CueResult compute_cues(const PipelineConfig& config, const VideoSequence& seq, FlowProvider* flow);

// Detector output per frame, queried once at `min_threshold`.
std::vector<std::vector<Detection>> detect_video(const PipelineConfig& config, const CueResult& cues,
                                                 DetectorProvider& detector, double min_threshold);

// Top positive box per frame among detections scoring at least `threshold`.
std::vector<std::optional<Detection>> select_boxes(const std::vector<std::vector<Detection>>& detections,
                                                   double threshold);

// Tracks according to config.track_mode. The result has a mask for every frame (empty where nothing was found).
MaskSeries segment_video(const PipelineConfig& config, const VideoSequence& seq, const PromptTimeline& timeline,
                         SegmenterProvider& segmenter);

struct VideoOutcome {
    std::string video;
    std::string route;
    std::optional<RouteDecision> decision;
    std::map<double, MaskSeries> masks;     // per threshold
    std::map<double, int> detected_frames;  // per threshold
    std::optional<std::string> error;
    double seconds = 0;
};

// Runs one video for every threshold in `thresholds`. Provider and I/O failures are captured in `error`.
VideoOutcome process_video(const PipelineConfig& config, const fs::path& video_dir, const ProviderSet& providers,
                           const std::vector<double>& thresholds);

// Single video at config.threshold. Throws on failure.
MaskSeries run_video(const PipelineConfig& config, const fs::path& video_dir);
MaskSeries run_video(const PipelineConfig& config, const fs::path& video_dir, const ProviderSet& providers);

struct ThresholdReport {
    double threshold = 0;
    EvalReport eval;
};

struct BestThreshold {
    Metric metric = Metric::IoU;
    double threshold = 0;       // single threshold best for the whole dataset
    double value = 0;
    double per_video_value = 0; // each video at its own best threshold, then averaged over videos
};

struct RunRecord {
    std::string version;
    std::map<std::string, std::string> config;  // full snapshot
    std::map<std::string, std::string> models;
    std::string dataset;
    std::vector<VideoOutcome> videos;  // sorted by id; masks dropped after evaluation
    std::vector<ThresholdReport> reports;
    std::vector<BestThreshold> best;
    double total_seconds = 0;
};

// Sub-directories of `root` that contain frames, sorted.
std::vector<fs::path> list_videos(const fs::path& root, const DatasetLayout& layout);

// Ground truth for one video directory; boxes come from the boxes file, or the mask extents when it is absent.
std::optional<GroundTruth> load_video_ground_truth(const fs::path& video_dir, const PipelineConfig& config,
                                                   std::optional<std::pair<int, int>> size = std::nullopt);

// One pipeline pass and evaluation per sweep threshold. When `mask_dir` is set,
// masks of the best mIoU threshold are written under <mask_dir>/<video>/.
RunRecord run_sweep(const PipelineConfig& config, const fs::path& dataset_root,
                    const std::optional<fs::path>& mask_dir = std::nullopt);

// Columns of the per-video markdown table, in order.
inline const std::vector<std::string> kPerVideoColumns = {"video", "route", "detected_frames", "mIoU@best",
                                                          "mIoU@video_best", "status"};

nlohmann::json eval_report_json(const EvalReport& report);
nlohmann::json run_record_json(const RunRecord& record);

// Writes report.json, report.csv, summary.md, and timing.json. Everything but
// timing.json is a pure function of the record's deterministic content.
void emit_report(const RunRecord& record, const fs::path& out_dir);

// Scores a prediction directory (<pred>/<video>/<frame>.png, soft or binary) against a dataset.
EvalReport evaluate_predictions(const fs::path& pred_root, const fs::path& dataset_root, const PipelineConfig& config);
void emit_eval_report(const EvalReport& report, const fs::path& out_dir);

std::string format_threshold(double t);

}  // namespace vcos
