#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "vcos/video_model.hpp"

namespace vcos {

std::vector<std::uint8_t> encode_png(const Frame& frame);
std::vector<std::uint8_t> encode_png(const BinaryMask& mask);

// Decodes PNG or JPEG bytes into an RGB frame.
Frame decode_image(std::span<const std::uint8_t> bytes, int index = 0);

// Decodes a single-channel (or color, converted to gray) image; pixels >= 128 are set.
BinaryMask decode_mask(std::span<const std::uint8_t> bytes);

struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> values;
};

GrayImage read_gray(const std::filesystem::path& path);

Frame read_image(const std::filesystem::path& path, int index = 0);
BinaryMask read_mask(const std::filesystem::path& path);
void write_png(const Frame& frame, const std::filesystem::path& path);
void write_png(const BinaryMask& mask, const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(std::span<const std::uint8_t> bytes, const std::filesystem::path& path);

}  // namespace vcos
