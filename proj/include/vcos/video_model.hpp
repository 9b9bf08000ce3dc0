#pragma once

// Core value types shared by every stage: frames, flow fields, masks, boxes,
// and the on-disk formats they are read from and written to.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vcos {

namespace fs = std::filesystem;

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    friend bool operator==(const Rgb&, const Rgb&) = default;
};

// Axis-aligned box in pixel units, half-open: [x0, x1) x [y0, y1).
struct BoundingBox {
    double x0 = 0;
    double y0 = 0;
    double x1 = 0;
    double y1 = 0;

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    double area() const { return width() > 0 && height() > 0 ? width() * height() : 0.0; }
    bool valid() const { return x0 < x1 && y0 < y1; }
    bool contains(double x, double y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

double box_iou(const BoundingBox& a, const BoundingBox& b);

// 8-bit RGB image, row-major, interleaved channels.
class Frame {
public:
    Frame() = default;
    Frame(int width, int height, int index = 0);
    Frame(int width, int height, std::vector<std::uint8_t> pixels, int index = 0);

    int width() const { return width_; }
    int height() const { return height_; }
    int index() const { return index_; }
    void set_index(int index) { index_ = index; }

    std::span<const std::uint8_t> pixels() const { return pixels_; }
    std::span<std::uint8_t> pixels() { return pixels_; }

    Rgb at(int x, int y) const;
    void set(int x, int y, Rgb value);
    std::uint8_t channel(int x, int y, int c) const {
        return pixels_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c];
    }

    // ITU-R BT.601 luma in [0, 255].
    std::vector<float> luma() const;

    bool same_size(const Frame& other) const { return width_ == other.width_ && height_ == other.height_; }
    friend bool operator==(const Frame&, const Frame&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    int index_ = 0;
    std::vector<std::uint8_t> pixels_;
};

class VideoSequence {
public:
    VideoSequence(std::vector<Frame> frames, std::string source_id);

    const std::vector<Frame>& frames() const { return frames_; }
    const Frame& frame(int i) const { return frames_.at(static_cast<std::size_t>(i)); }
    int size() const { return static_cast<int>(frames_.size()); }
    int width() const { return frames_.front().width(); }
    int height() const { return frames_.front().height(); }
    const std::string& source_id() const { return source_id_; }

    // Same frames in reverse temporal order; frame i of the result is frame t-1-i here.
    VideoSequence reversed() const;

private:
    std::vector<Frame> frames_;
    std::string source_id_;
};

// Dense displacement field; each pixel stores (dx, dy) in pixels.
class FlowField {
public:
    FlowField() = default;
    FlowField(int width, int height);
    FlowField(int width, int height, std::vector<float> vectors);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

    float dx(std::size_t p) const { return data_[2 * p]; }
    float dy(std::size_t p) const { return data_[2 * p + 1]; }
    void set(std::size_t p, float dx, float dy) {
        data_[2 * p] = dx;
        data_[2 * p + 1] = dy;
    }
    std::span<const float> data() const { return data_; }
    std::span<float> data() { return data_; }

    bool same_size(const FlowField& other) const { return width_ == other.width_ && height_ == other.height_; }
    bool all_finite() const;
    friend bool operator==(const FlowField&, const FlowField&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<float> data_;
};

class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(int width, int height, bool fill = false);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t pixel_count() const { return bits_.size(); }

    bool at(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
    void set(int x, int y, bool v) { bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }
    bool operator[](std::size_t p) const { return bits_[p] != 0; }
    void set(std::size_t p, bool v) { bits_[p] = v ? 1 : 0; }

    std::size_t count() const;
    bool empty() const { return count() == 0; }
    bool same_size(const BinaryMask& other) const { return width_ == other.width_ && height_ == other.height_; }

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

struct MaskSeries {
    std::string video_id;
    std::map<int, BinaryMask> masks;

    // Throws DimensionMismatch when masks disagree in size, InvalidArgument for a negative index.
    void validate() const;
    friend bool operator==(const MaskSeries&, const MaskSeries&) = default;
};

struct GroundTruth {
    std::string video_id;
    std::map<int, BinaryMask> masks;
    std::map<int, BoundingBox> boxes;
};

// Directory-name configuration for dataset layouts such as <root>/<video>/Imgs, <root>/<video>/GT.
struct DatasetLayout {
    std::string images_dir = "Imgs";
    std::string gt_dir = "GT";
    std::string boxes_file = "boxes.csv";
};

// Reads all PNG/JPEG files in `dir` in lexicographic filename order. If `dir`
// has an images subdirectory (MoCA-Mask layout), that is read instead and the
// source id is the video directory name.
VideoSequence load_sequence(const fs::path& dir, const DatasetLayout& layout = {});

// Masks are thresholded at 128. The frame index comes from the numeric filename
// stem; non-numeric names fall back to position * stride_hint.
GroundTruth load_ground_truth(const fs::path& dir, int stride_hint = 5,
                              std::optional<std::pair<int, int>> expected_size = std::nullopt);

// Per-frame boxes, one "frame,x0,y0,x1,y1" row per annotated frame.
std::map<int, BoundingBox> load_boxes_csv(const fs::path& path);
void save_boxes_csv(const std::map<int, BoundingBox>& boxes, const fs::path& path);

// Middlebury .flo layout: "PIEH", int32 width, int32 height, float32 (dx, dy) pairs.
std::vector<std::uint8_t> encode_flow(const FlowField& flow);
FlowField decode_flow(std::span<const std::uint8_t> bytes);
FlowField read_flow_file(const fs::path& path);
void write_flow_file(const FlowField& flow, const fs::path& path);

// Writes <dir>/<index padded to 5 digits>.png, single channel {0,255}.
void save_mask_series(const MaskSeries& series, const fs::path& dir);
MaskSeries load_mask_series(const fs::path& dir);

std::string frame_filename(int index, const std::string& ext = ".png");

}  // namespace vcos
