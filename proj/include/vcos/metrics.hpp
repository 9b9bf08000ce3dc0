#pragma once

// Segmentation and detection metrics with explicit aggregation semantics.
//
// Empty ground truth: a frame with an empty ground-truth mask scores 1 on every
// similarity metric when the prediction is also empty and 0 otherwise. MAE is
// always the plain mean absolute difference.

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vcos/video_model.hpp"

namespace vcos {

// Soft prediction in [0, 1].
class SoftMap {
public:
    SoftMap() = default;
    SoftMap(int width, int height, std::vector<double> values);
    explicit SoftMap(const BinaryMask& mask);

    int width() const { return width_; }
    int height() const { return height_; }
    double operator[](std::size_t p) const { return values_[p]; }
    double at(int x, int y) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }
    const std::vector<double>& values() const { return values_; }
    std::size_t pixel_count() const { return values_.size(); }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> values_;
};

SoftMap read_soft_map(const fs::path& path);

BinaryMask binarize(const SoftMap& soft, double threshold);

enum class Metric { IoU, Dice, Mae, SMeasure, EMeasure, WeightedF };
inline constexpr std::array<Metric, 6> kAllMetrics = {Metric::IoU,      Metric::Dice,     Metric::Mae,
                                                       Metric::SMeasure, Metric::EMeasure, Metric::WeightedF};
const char* to_string(Metric m);
bool higher_is_better(Metric m);
bool pixel_poolable(Metric m);

enum class AggregationMode { FrameThenVideo, FramePooled, PixelPooled };
inline constexpr std::array<AggregationMode, 3> kAllModes = {
    AggregationMode::FrameThenVideo, AggregationMode::FramePooled, AggregationMode::PixelPooled};
const char* to_string(AggregationMode m);
AggregationMode parse_aggregation_mode(const std::string& s);

extern const char* const kEmptyGroundTruthRule;

struct PixelCounts {
    std::size_t intersection = 0;
    std::size_t union_ = 0;
    std::size_t pred = 0;
    std::size_t gt = 0;
    double abs_diff = 0;
    std::size_t pixels = 0;
};

PixelCounts count_pixels(const BinaryMask& pred, const BinaryMask& gt);

double frame_iou(const BinaryMask& pred, const BinaryMask& gt);
double frame_dice(const BinaryMask& pred, const BinaryMask& gt);
double frame_mae(const BinaryMask& pred, const BinaryMask& gt);
double frame_mae(const SoftMap& pred, const BinaryMask& gt);

// Structure measure: 0.5 * object-aware + 0.5 * region-aware similarity.
double s_measure(const SoftMap& pred, const BinaryMask& gt);

// Enhanced-alignment measure on binary maps, averaged over all pixels.
double e_measure(const BinaryMask& pred, const BinaryMask& gt);

// Weighted F-measure (beta = 1) with distance-dependent error weighting.
double weighted_f(const SoftMap& pred, const BinaryMask& gt);

struct FrameScore {
    int frame = 0;
    double iou = 0;
    double dice = 0;
    double mae = 0;
    double s_measure = 0;
    double e_measure = 0;
    double weighted_f = 0;
    PixelCounts counts;

    double value(Metric m) const;
};

FrameScore score_frame(const BinaryMask& pred, const BinaryMask& gt, int frame = 0);

// Dataset scalar for one metric. PixelPooled treats every frame of every video
// as one concatenated image and is only defined for IoU, Dice, and MAE.
double aggregate(const std::vector<std::vector<FrameScore>>& per_video, Metric metric, AggregationMode mode);

// Tight box of the largest 8-connected component; nullopt for an empty mask.
std::optional<BoundingBox> largest_component_box(const BinaryMask& mask);

// Fraction of annotated frames whose predicted box reaches IoU >= tau.
double detection_success_rate(const std::map<int, std::optional<BoundingBox>>& pred,
                              const std::map<int, BoundingBox>& gt, double tau);

struct EvalFlags {
    AggregationMode mode = AggregationMode::FrameThenVideo;
    bool omit_last_frame = false;
    double binarize_threshold = 0.5;
    double dsr_tau = 0.5;
};

struct VideoEval {
    std::string video;
    std::vector<FrameScore> frames;
    std::optional<double> success_rate;
    std::size_t box_frames = 0;
    std::size_t box_hits = 0;
    bool missing_prediction = false;

    double mean(Metric m) const;
};

struct EvalReport {
    EvalFlags flags;
    std::vector<VideoEval> videos;  // sorted by video id
    std::map<AggregationMode, std::map<Metric, std::optional<double>>> aggregates;
    std::map<AggregationMode, std::optional<double>> success_rate;
    std::vector<std::string> warnings;

    // Aggregate under the report's declared mode.
    std::optional<double> headline(Metric m) const;
};

EvalReport evaluate_dataset(const std::map<std::string, MaskSeries>& preds,
                            const std::map<std::string, GroundTruth>& gts, const EvalFlags& flags);

}  // namespace vcos
