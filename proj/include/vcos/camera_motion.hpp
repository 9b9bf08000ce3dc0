#pragma once

// Static-vs-moving camera classification. Sparse corners are tracked with
// pyramidal Lucas-Kanade, each frame pair is fitted with a RANSAC affine, and
// the affines are composed from frame 0 to find how far the image center ever
// travels.

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "vcos/video_model.hpp"

namespace vcos {

struct Point2 {
    double x = 0;
    double y = 0;
};

struct FeaturePoint {
    double x = 0;
    double y = 0;
    double score = 0;  // min eigenvalue of the 3x3 structure tensor
};

struct PointPair {
    Point2 from;
    Point2 to;
};

// Maps (x, y) to (a*x + b*y + tx, c*x + d*y + ty).
struct AffineTransform {
    double a = 1, b = 0, tx = 0;
    double c = 0, d = 1, ty = 0;

    static AffineTransform identity() { return {}; }
    Point2 apply(Point2 p) const { return {a * p.x + b * p.y + tx, c * p.x + d * p.y + ty}; }
    double determinant() const { return a * d - b * c; }
    // (this o first): applies `first`, then this transform.
    AffineTransform after(const AffineTransform& first) const;
};

enum class MotionRoute { OpticalFlow, BackgroundSubtraction };

const char* to_string(MotionRoute route);

struct RouteDecision {
    MotionRoute route = MotionRoute::OpticalFlow;
    double max_excursion = 0;  // pixels
    int degenerate_pairs = 0;
    int pair_count = 0;
};

struct FeatureParams {
    int max_points = 100;
    double min_distance = 5.0;
    double quality_level = 0.01;  // relative to the strongest response
    double min_score = 1e-6;
};

struct TrackerParams {
    int pyramid_levels = 3;
    int window = 21;
    int max_iterations = 30;
    double epsilon = 0.01;
    double min_eigen = 1e-3;      // per-pixel normalized, luma units^2
    double max_residual = 12.0;   // mean absolute luma error over the window
};

struct RansacParams {
    int iterations = 200;
    double inlier_threshold = 2.0;
    std::uint64_t seed = 1234;
};

struct CameraMotionParams {
    double theta_cam_frac = 0.02;  // fraction of frame diagonal
    FeatureParams features;
    TrackerParams tracker;
    RansacParams ransac;
};

// Min-eigenvalue map of the 3x3-window structure tensor of central-difference
// gradients. Border pixels closer than 2 px to the edge are zero.
std::vector<double> structure_tensor_scores(const std::vector<float>& gray, int width, int height);

std::vector<FeaturePoint> detect_features(const Frame& frame, int max_points, double min_distance);
std::vector<FeaturePoint> detect_features(const Frame& frame, const FeatureParams& params);

std::vector<PointPair> track_features(const Frame& prev, const Frame& curr, const std::vector<FeaturePoint>& points,
                                      const TrackerParams& params = {});

// Least-squares affine through all pairs. Throws DegenerateGeometry.
AffineTransform fit_affine(const std::vector<PointPair>& pairs);

AffineTransform estimate_affine(const std::vector<PointPair>& pairs, const RansacParams& params = {});

RouteDecision classify_camera_motion(const VideoSequence& seq, const CameraMotionParams& params = {});

}  // namespace vcos
