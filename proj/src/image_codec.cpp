#include "vcos/image_codec.hpp"

#include <fstream>
#include <iterator>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "vcos/errors.hpp"

namespace vcos {

namespace {

cv::Mat to_bgr_mat(const Frame& frame) {
    cv::Mat mat(frame.height(), frame.width(), CV_8UC3);
    const auto px = frame.pixels();
    for (int y = 0; y < frame.height(); ++y) {
        auto* row = mat.ptr<std::uint8_t>(y);
        for (int x = 0; x < frame.width(); ++x) {
            const std::size_t s = (static_cast<std::size_t>(y) * frame.width() + x) * 3;
            row[3 * x + 0] = px[s + 2];
            row[3 * x + 1] = px[s + 1];
            row[3 * x + 2] = px[s + 0];
        }
    }
    return mat;
}

cv::Mat to_gray_mat(const BinaryMask& mask) {
    cv::Mat mat(mask.height(), mask.width(), CV_8UC1);
    for (int y = 0; y < mask.height(); ++y) {
        auto* row = mat.ptr<std::uint8_t>(y);
        for (int x = 0; x < mask.width(); ++x) row[x] = mask.at(x, y) ? 255 : 0;
    }
    return mat;
}

std::vector<std::uint8_t> encode(const cv::Mat& mat) {
    std::vector<std::uint8_t> out;
    if (!cv::imencode(".png", mat, out)) throw FormatError("PNG encoding failed");
    return out;
}

Frame from_bgr_mat(const cv::Mat& mat, int index) {
    Frame frame(mat.cols, mat.rows, index);
    for (int y = 0; y < mat.rows; ++y) {
        const auto* row = mat.ptr<std::uint8_t>(y);
        for (int x = 0; x < mat.cols; ++x) frame.set(x, y, Rgb{row[3 * x + 2], row[3 * x + 1], row[3 * x]});
    }
    return frame;
}

BinaryMask from_gray_mat(const cv::Mat& mat) {
    BinaryMask mask(mat.cols, mat.rows);
    for (int y = 0; y < mat.rows; ++y) {
        const auto* row = mat.ptr<std::uint8_t>(y);
        for (int x = 0; x < mat.cols; ++x) mask.set(x, y, row[x] >= 128);
    }
    return mask;
}

cv::Mat decode_raw(std::span<const std::uint8_t> bytes, int flags) {
    if (bytes.empty()) throw FormatError("empty image payload");
    const cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
    cv::Mat mat = cv::imdecode(buf, flags);
    if (mat.empty()) throw FormatError("undecodable image payload");
    return mat;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Frame& frame) { return encode(to_bgr_mat(frame)); }

std::vector<std::uint8_t> encode_png(const BinaryMask& mask) { return encode(to_gray_mat(mask)); }

Frame decode_image(std::span<const std::uint8_t> bytes, int index) {
    return from_bgr_mat(decode_raw(bytes, cv::IMREAD_COLOR), index);
}

BinaryMask decode_mask(std::span<const std::uint8_t> bytes) {
    return from_gray_mat(decode_raw(bytes, cv::IMREAD_GRAYSCALE));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(std::span<const std::uint8_t> bytes, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

Frame read_image(const std::filesystem::path& path, int index) {
    const auto bytes = read_file_bytes(path);
    try {
        return decode_image(bytes, index);
    } catch (const FormatError&) {
        throw FormatError("undecodable image " + path.string());
    }
}

BinaryMask read_mask(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    try {
        return decode_mask(bytes);
    } catch (const FormatError&) {
        throw FormatError("undecodable mask " + path.string());
    }
}

GrayImage read_gray(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    cv::Mat mat;
    try {
        mat = decode_raw(bytes, cv::IMREAD_GRAYSCALE);
    } catch (const FormatError&) {
        throw FormatError("undecodable image " + path.string());
    }
    GrayImage out{mat.cols, mat.rows, {}};
    out.values.reserve(static_cast<std::size_t>(mat.cols) * mat.rows);
    for (int y = 0; y < mat.rows; ++y) {
        const auto* row = mat.ptr<std::uint8_t>(y);
        out.values.insert(out.values.end(), row, row + mat.cols);
    }
    return out;
}

void write_png(const Frame& frame, const std::filesystem::path& path) { write_file_bytes(encode_png(frame), path); }

void write_png(const BinaryMask& mask, const std::filesystem::path& path) { write_file_bytes(encode_png(mask), path); }

}  // namespace vcos
