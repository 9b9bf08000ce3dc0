#pragma once

// Helpers shared by the unit suites and the acceptance binary.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "vcos/metrics.hpp"
#include "vcos/video_model.hpp"

namespace vcos::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "t");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

BinaryMask random_mask(std::mt19937_64& rng, int width, int height, double density);
SoftMap random_soft(std::mt19937_64& rng, int width, int height);
BinaryMask rect_mask(int width, int height, int x0, int y0, int x1, int y1);

// Textured frame from a smooth random field; no flat regions.
Frame textured_frame(int width, int height, std::uint64_t seed, double shift_x = 0, double shift_y = 0);

std::string read_text(const fs::path& path);

// Independent implementations of the structure, enhanced-alignment and
// weighted F measures, written from the original definitions with
// 1-based matrix indexing. Conventions shared with the library: E-measure
// averages over all N pixels, nearest-foreground ties go to the smallest
// row-major index, zero-area quadrants contribute nothing.
namespace reference {

using Matrix = std::vector<std::vector<double>>;  // [row][col]

Matrix to_matrix(const SoftMap& m);
Matrix to_matrix(const BinaryMask& m);

double s_measure(const Matrix& pred, const Matrix& gt);
double e_measure(const Matrix& pred, const Matrix& gt);
double weighted_f(const Matrix& pred, const Matrix& gt);

// Min eigenvalue of the 3x3-window structure tensor at every pixel, by brute force.
std::vector<double> structure_tensor(const std::vector<float>& gray, int width, int height);

}  // namespace reference

}  // namespace vcos::testing
