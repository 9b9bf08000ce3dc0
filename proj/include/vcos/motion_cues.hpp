#pragma once

#include <span>
#include <vector>

#include "vcos/video_model.hpp"

namespace vcos {

// Per-pixel motion strength in [0, 255].
class IntensityMap {
public:
    IntensityMap() = default;
    IntensityMap(int width, int height, double fill = 0.0);
    IntensityMap(int width, int height, std::vector<double> values);

    int width() const { return width_; }
    int height() const { return height_; }
    double at(int x, int y) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }
    double operator[](std::size_t p) const { return values_[p]; }
    std::span<const double> values() const { return values_; }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> values_;
};

// Maps raw scores linearly onto [0, 255]. A range below 1e-12 yields all zeros.
IntensityMap normalize_to_byte_range(int width, int height, std::span<const double> raw);
IntensityMap normalize_to_byte_range(int width, int height, std::span<const double> raw, double lo, double hi);

FlowField subtract_mean_flow(const FlowField& flow);

// Running average of successive flow fields with momentum m:
// F_1 passes through, then F_i <- (1 - m) F_i + m F_{i-1}.
class FlowEma {
public:
    explicit FlowEma(double momentum);

    double momentum() const { return momentum_; }
    // i is the 1-based position of `flow` in the flow sequence.
    FlowField apply(const FlowField& flow, int i);
    const FlowField& state() const { return ema_; }

private:
    double momentum_;
    bool primed_ = false;
    FlowField ema_;
};

// L2 magnitude per pixel, before normalization.
std::vector<double> flow_magnitude(const FlowField& flow);
IntensityMap flow_intensity(const FlowField& flow);

struct BgsParams {
    int k = 5;
    double alpha = 0.01;
    double var_floor = 4.0;
    double var_init = 15.0;
    double match_sigmas = 3.0;
};

// Per-pixel mixture of isotropic RGB Gaussians (MOG2-style update).
class BackgroundModel {
public:
    struct Component {
        double weight = 0;
        double mean[3] = {0, 0, 0};
        double var = 0;
    };

    explicit BackgroundModel(BgsParams params = {});

    // Feeds one frame and returns the current background estimate (the mean of
    // the heaviest component at each pixel). The first frame initializes.
    Frame update(const Frame& frame);

    bool initialized() const { return width_ > 0; }
    const BgsParams& params() const { return params_; }
    std::span<const Component> components_at(int x, int y) const;

private:
    BgsParams params_;
    int width_ = 0;
    int height_ = 0;
    std::vector<Component> comps_;
};

// L1 RGB difference per pixel, before normalization.
std::vector<double> frame_difference(const Frame& frame, const Frame& background);
IntensityMap bgs_intensity(const Frame& frame, const Frame& background);

struct HighlightedFrame {
    Frame frame;
    Rgb color;
};

// out = round((1 - w) * frame + w * color) with w = intensity / 255.
HighlightedFrame blend_highlight(const Frame& frame, const IntensityMap& intensity, Rgb color = {0, 0, 255});

}  // namespace vcos
