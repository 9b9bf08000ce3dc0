#include "vcos/video_model.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "vcos/errors.hpp"
#include "vcos/image_codec.hpp"

namespace vcos {

double box_iou(const BoundingBox& a, const BoundingBox& b) {
    const double ix = std::max(0.0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
    const double iy = std::max(0.0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    return uni > 0 ? inter / uni : 0.0;
}

// ---------------------------------------------------------------- Frame

Frame::Frame(int width, int height, int index)
    : width_(width), height_(height), index_(index) {
    if (width <= 0 || height <= 0) throw InvalidArgument("frame dimensions must be positive");
    pixels_.assign(static_cast<std::size_t>(width) * height * 3, 0);
}

Frame::Frame(int width, int height, std::vector<std::uint8_t> pixels, int index)
    : width_(width), height_(height), index_(index), pixels_(std::move(pixels)) {
    if (width <= 0 || height <= 0) throw InvalidArgument("frame dimensions must be positive");
    if (pixels_.size() != static_cast<std::size_t>(width) * height * 3)
        throw InvalidArgument("pixel buffer length must be width*height*3");
}

Rgb Frame::at(int x, int y) const {
    const std::size_t s = (static_cast<std::size_t>(y) * width_ + x) * 3;
    return {pixels_[s], pixels_[s + 1], pixels_[s + 2]};
}

void Frame::set(int x, int y, Rgb value) {
    const std::size_t s = (static_cast<std::size_t>(y) * width_ + x) * 3;
    pixels_[s] = value.r;
    pixels_[s + 1] = value.g;
    pixels_[s + 2] = value.b;
}

std::vector<float> Frame::luma() const {
    std::vector<float> out(static_cast<std::size_t>(width_) * height_);
    for (std::size_t p = 0; p < out.size(); ++p) {
        out[p] = static_cast<float>(0.299 * pixels_[3 * p] + 0.587 * pixels_[3 * p + 1] + 0.114 * pixels_[3 * p + 2]);
    }
    return out;
}

// ---------------------------------------------------------------- VideoSequence

VideoSequence::VideoSequence(std::vector<Frame> frames, std::string source_id)
    : frames_(std::move(frames)), source_id_(std::move(source_id)) {
    if (frames_.size() < 2) throw InvalidArgument("a video sequence needs at least 2 frames");
    for (const auto& f : frames_) {
        if (!f.same_size(frames_.front()))
            throw DimensionMismatch("frame " + std::to_string(f.index()) + " differs in size from frame 0");
    }
}

VideoSequence VideoSequence::reversed() const {
    std::vector<Frame> out(frames_.rbegin(), frames_.rend());
    for (std::size_t i = 0; i < out.size(); ++i) out[i].set_index(static_cast<int>(i));
    return VideoSequence(std::move(out), source_id_);
}

// ---------------------------------------------------------------- FlowField

FlowField::FlowField(int width, int height) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) throw InvalidArgument("flow dimensions must be positive");
    data_.assign(static_cast<std::size_t>(width) * height * 2, 0.0f);
}

FlowField::FlowField(int width, int height, std::vector<float> vectors)
    : width_(width), height_(height), data_(std::move(vectors)) {
    if (width <= 0 || height <= 0) throw InvalidArgument("flow dimensions must be positive");
    if (data_.size() != static_cast<std::size_t>(width) * height * 2)
        throw InvalidArgument("flow buffer length must be width*height*2");
}

bool FlowField::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------- BinaryMask

BinaryMask::BinaryMask(int width, int height, bool fill) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) throw InvalidArgument("mask dimensions must be positive");
    bits_.assign(static_cast<std::size_t>(width) * height, fill ? 1 : 0);
}

std::size_t BinaryMask::count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

void MaskSeries::validate() const {
    const BinaryMask* first = nullptr;
    for (const auto& [idx, mask] : masks) {
        if (idx < 0) throw InvalidArgument("negative frame index in mask series");
        if (first && !first->same_size(mask)) throw DimensionMismatch("mask series has mixed dimensions");
        first = &mask;
    }
}

// ---------------------------------------------------------------- dataset I/O

namespace {

bool is_image_file(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::vector<fs::path> sorted_images(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    return files;
}

std::optional<int> numeric_stem(const fs::path& p) {
    const std::string stem = p.stem().string();
    if (stem.empty()) return std::nullopt;
    int value = 0;
    const auto [ptr, ec] = std::from_chars(stem.data(), stem.data() + stem.size(), value);
    if (ec != std::errc{} || ptr != stem.data() + stem.size() || value < 0) return std::nullopt;
    return value;
}

}  // namespace

VideoSequence load_sequence(const fs::path& dir, const DatasetLayout& layout) {
    fs::path image_dir = dir;
    fs::path named = dir;
    if (fs::is_directory(dir / layout.images_dir)) {
        image_dir = dir / layout.images_dir;
    } else if (dir.filename() == layout.images_dir) {
        named = dir.parent_path();
    }
    const auto files = sorted_images(image_dir);
    if (files.empty()) throw IoError("no image files in " + image_dir.string());

    std::vector<Frame> frames;
    frames.reserve(files.size());
    for (const auto& file : files) {
        frames.push_back(read_image(file, static_cast<int>(frames.size())));
        if (!frames.back().same_size(frames.front()))
            throw DimensionMismatch("image " + file.filename().string() + " differs in size from " +
                                    files.front().filename().string());
    }
    std::string id = fs::path(named).lexically_normal().filename().string();
    if (id.empty()) id = fs::path(named).lexically_normal().parent_path().filename().string();
    return VideoSequence(std::move(frames), id);
}

GroundTruth load_ground_truth(const fs::path& dir, int stride_hint, std::optional<std::pair<int, int>> expected_size) {
    const auto files = sorted_images(dir);
    if (files.empty()) throw IoError("no ground-truth masks in " + dir.string());
    GroundTruth gt;
    gt.video_id = dir.parent_path().filename().string();
    int position = 0;
    for (const auto& file : files) {
        const int index = numeric_stem(file).value_or(position * stride_hint);
        BinaryMask mask = read_mask(file);
        if (expected_size && (mask.width() != expected_size->first || mask.height() != expected_size->second))
            throw DimensionMismatch("mask " + file.string() + " does not match frame dimensions");
        if (!gt.masks.empty() && !gt.masks.begin()->second.same_size(mask))
            throw DimensionMismatch("mask " + file.string() + " differs in size from other masks");
        gt.masks.emplace(index, std::move(mask));
        ++position;
    }
    return gt;
}

std::map<int, BoundingBox> load_boxes_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::map<int, BoundingBox> boxes;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("frame", 0) == 0) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        int frame = 0;
        BoundingBox b;
        if (!(ss >> frame >> b.x0 >> b.y0 >> b.x1 >> b.y1)) throw FormatError("bad box row in " + path.string());
        if (!b.valid()) throw FormatError("degenerate box in " + path.string());
        boxes[frame] = b;
    }
    return boxes;
}

void save_boxes_csv(const std::map<int, BoundingBox>& boxes, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "frame,x0,y0,x1,y1\n";
    for (const auto& [frame, b] : boxes) out << frame << ',' << b.x0 << ',' << b.y0 << ',' << b.x1 << ',' << b.y1 << '\n';
}

// ---------------------------------------------------------------- flow files

namespace {

constexpr char kFlowMagic[4] = {'P', 'I', 'E', 'H'};
constexpr std::size_t kFlowHeader = 12;

void put_le32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_le32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<std::uint8_t> encode_flow(const FlowField& flow) {
    std::vector<std::uint8_t> out;
    out.reserve(kFlowHeader + flow.data().size() * 4);
    out.insert(out.end(), std::begin(kFlowMagic), std::end(kFlowMagic));
    put_le32(out, static_cast<std::uint32_t>(flow.width()));
    put_le32(out, static_cast<std::uint32_t>(flow.height()));
    for (float v : flow.data()) put_le32(out, std::bit_cast<std::uint32_t>(v));
    return out;
}

FlowField decode_flow(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kFlowHeader) throw FormatError("flow payload shorter than header");
    if (std::memcmp(bytes.data(), kFlowMagic, 4) != 0) throw FormatError("bad flow magic (expected PIEH)");
    const auto width = static_cast<std::int32_t>(get_le32(bytes.data() + 4));
    const auto height = static_cast<std::int32_t>(get_le32(bytes.data() + 8));
    if (width <= 0 || height <= 0 || width > 100000 || height > 100000)
        throw FormatError("illegal flow dimensions");
    const std::size_t count = static_cast<std::size_t>(width) * height * 2;
    if (bytes.size() != kFlowHeader + count * 4) throw FormatError("flow payload truncated or oversized");
    std::vector<float> data(count);
    for (std::size_t i = 0; i < count; ++i)
        data[i] = std::bit_cast<float>(get_le32(bytes.data() + kFlowHeader + 4 * i));
    return FlowField(width, height, std::move(data));
}

FlowField read_flow_file(const fs::path& path) { return decode_flow(read_file_bytes(path)); }

void write_flow_file(const FlowField& flow, const fs::path& path) { write_file_bytes(encode_flow(flow), path); }

// ---------------------------------------------------------------- mask series

std::string frame_filename(int index, const std::string& ext) {
    std::string digits = std::to_string(index);
    if (digits.size() < 5) digits.insert(0, 5 - digits.size(), '0');
    return digits + ext;
}

void save_mask_series(const MaskSeries& series, const fs::path& dir) {
    series.validate();
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    for (const auto& [idx, mask] : series.masks) write_png(mask, dir / frame_filename(idx));
}

MaskSeries load_mask_series(const fs::path& dir) {
    MaskSeries series;
    series.video_id = dir.filename().string();
    int position = 0;
    for (const auto& file : sorted_images(dir)) {
        series.masks.emplace(numeric_stem(file).value_or(position), read_mask(file));
        ++position;
    }
    series.validate();
    return series;
}

}  // namespace vcos
