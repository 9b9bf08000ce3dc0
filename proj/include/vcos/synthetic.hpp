#pragma once

// Procedural camouflage videos with exact ground truth.
//
// Coordinates: a camera affine maps frame pixel coordinates to world
// coordinates (pixel centers at integer positions). The background is a
// value-noise texture fixed in world space; the object carries the same
// texture, sampled at an offset and shifted in brightness by a small delta,
// so it matches the background statistically and only its motion betrays it.
//
// Flow sign convention: flow(t -> t+1) at pixel x is x' - x, where x' is the
// position of the same world point in frame t+1. A camera panning +1 px/frame
// in world x therefore gives background flow (-1, 0).

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vcos/camera_motion.hpp"
#include "vcos/video_model.hpp"

namespace vcos {

struct TextureSpec {
    double scale = 6.0;  // pixels per lattice cell at the coarsest octave
    int octaves = 3;
    Rgb base{118, 104, 82};
    double contrast = 90.0;  // peak-to-peak luma swing
};

enum class Shape { Ellipse, Rectangle };

struct ObjectSpec {
    Shape shape = Shape::Ellipse;
    double width = 28;
    double height = 20;
    Point2 start{64, 64};  // center in world coordinates at frame 0
    double contrast_delta = 4.0;  // brightness offset, at most 5
    Point2 texture_offset{37.0, 53.0};
};

struct Distractor {
    Shape shape = Shape::Rectangle;
    double width = 14;
    double height = 14;
    Point2 center{24, 24};  // world coordinates, stationary
    double contrast_delta = 5.0;
    Point2 texture_offset{71.0, 19.0};
};

struct SceneScript {
    std::string name = "scene";
    int width = 128;
    int height = 128;
    int frame_count = 30;
    TextureSpec texture;
    ObjectSpec object;
    std::vector<Point2> object_steps;       // per-frame (dx, dy); entry t moves the object into frame t
    std::vector<AffineTransform> camera;    // per-frame frame-to-world transform
    std::vector<Distractor> distractors;

    // Throws InvalidArgument for inconsistent lengths or an out-of-range delta.
    void validate() const;
    // Object center in world coordinates at frame t.
    Point2 object_center(int t) const;
};

// Fills trajectories: constant object velocity and constant camera translation per frame.
SceneScript make_linear_scene(int width, int height, int frame_count, Point2 object_velocity, Point2 camera_velocity);

struct SyntheticVideo {
    VideoSequence video;
    GroundTruth gt;               // masks and tight boxes on every frame
    std::vector<FlowField> flows; // flows[t] = flow(t -> t+1)
};

// Deterministic per (script, seed). Throws InvalidArgument when the object leaves the canvas.
SyntheticVideo generate(const SceneScript& script, std::uint64_t seed);

// Texture color at a world position, before quantization.
std::array<double, 3> texture_color(const TextureSpec& tex, std::uint64_t seed, double wx, double wy);

// True when world point (wx, wy) lies on the object at frame t.
bool object_covers(const SceneScript& script, int t, double wx, double wy);

BinaryMask render_object_mask(const SceneScript& script, int t);

// Exact flow between arbitrary frames a -> b.
FlowField analytic_flow(const SceneScript& script, int a, int b);

AffineTransform invert(const AffineTransform& t);

nlohmann::json scene_to_json(const SceneScript& script, std::uint64_t seed);
SceneScript scene_from_json(const nlohmann::json& j, std::uint64_t* seed = nullptr);

// A mixed fixture set: static and panning cameras, varied sizes and speeds.
std::vector<SceneScript> standard_scripts(int count = 10, int width = 128, int height = 128, int frames = 30);

struct SynthOptions {
    int gt_stride = 5;          // ground truth written every gt_stride frames, from frame 0
    bool write_flow = true;     // exact flows as Flow/<frame>.flo
    DatasetLayout layout;
};

// Writes <root>/<name>/{Imgs,GT,Flow}, boxes.csv, and scene.json for every script.
// Frames are PNG so the small camouflage delta survives encoding.
void write_synthetic_dataset(const fs::path& root, const std::vector<SceneScript>& scripts, std::uint64_t seed,
                             const SynthOptions& options = {});

inline constexpr const char* kSceneFile = "scene.json";
inline constexpr const char* kFlowDir = "Flow";

}  // namespace vcos
