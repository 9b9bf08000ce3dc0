#include <doctest.h>

#include <chrono>
#include <cmath>
#include <random>

#include "test_support.hpp"
#include "vcos/camera_motion.hpp"
#include "vcos/errors.hpp"
#include "vcos/synthetic.hpp"

using namespace vcos;

namespace {

Frame square_frame(int size, int x0, int y0, int side) {
    Frame f(size, size);
    for (int y = y0; y < y0 + side; ++y)
        for (int x = x0; x < x0 + side; ++x) f.set(x, y, {255, 255, 255});
    return f;
}

std::vector<PointPair> grid_pairs(const AffineTransform& t) {
    std::vector<PointPair> out;
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 6; ++x) {
            const Point2 p{10.0 + 17 * x, 8.0 + 13 * y};
            out.push_back({p, t.apply(p)});
        }
    return out;
}

}  // namespace

TEST_CASE("structure tensor scores match the brute force eigenvalues") {
    for (std::uint64_t seed : {1, 2, 3}) {
        const Frame f = vcos::testing::textured_frame(23, 19, seed);
        const auto gray = f.luma();
        const auto got = structure_tensor_scores(gray, 23, 19);
        const auto want = vcos::testing::reference::structure_tensor(gray, 23, 19);
        REQUIRE(got.size() == want.size());
        for (std::size_t p = 0; p < got.size(); ++p) CHECK(got[p] == doctest::Approx(want[p]).epsilon(1e-9).scale(1));
    }
}

TEST_CASE("square corners rank highest") {
    const Frame f = square_frame(32, 10, 12, 9);
    const auto gray = f.luma();
    const auto ref = vcos::testing::reference::structure_tensor(gray, 32, 32);
    const double best = *std::max_element(ref.begin(), ref.end());

    const auto pts = detect_features(f, 4, 3.0);
    REQUIRE(pts.size() == 4);
    for (const auto& p : pts) {
        CHECK(ref[static_cast<std::size_t>(p.y) * 32 + static_cast<std::size_t>(p.x)] == doctest::Approx(best));
        const bool near_x = std::abs(p.x - 10) <= 1 || std::abs(p.x - 18) <= 1;
        const bool near_y = std::abs(p.y - 12) <= 1 || std::abs(p.y - 20) <= 1;
        CHECK(near_x);
        CHECK(near_y);
    }
    for (std::size_t i = 1; i < pts.size(); ++i) CHECK(pts[i - 1].score >= pts[i].score);

    const auto one = detect_features(f, 1, 3.0);
    REQUIRE(one.size() == 1);
    CHECK(one[0].score == doctest::Approx(best));
}

TEST_CASE("feature detection edge cases") {
    Frame flat(16, 16);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) flat.set(x, y, {90, 90, 90});
    CHECK(detect_features(flat, 10, 3.0).empty());
    CHECK_THROWS_AS(detect_features(Frame(4, 4), 10, 3.0), InvalidArgument);

    const Frame tex = vcos::testing::textured_frame(48, 48, 5);
    const auto pts = detect_features(tex, 40, 6.0);
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j)
            CHECK(std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y) >= 6.0);
}

TEST_CASE("lucas kanade on identical frames") {
    const Frame a = vcos::testing::textured_frame(64, 64, 9);
    const auto pts = detect_features(a, 30, 5.0);
    REQUIRE(pts.size() >= 10);

    const auto same = track_features(a, a, pts);
    CHECK(same.size() == pts.size());
    for (const auto& p : same) {
        CHECK(std::abs(p.to.x - p.from.x) < 1e-3);
        CHECK(std::abs(p.to.y - p.from.y) < 1e-3);
    }
}

TEST_CASE("lucas kanade translation within half a pixel") {
    const Frame a = vcos::testing::textured_frame(64, 64, 21);
    const Frame b = vcos::testing::textured_frame(64, 64, 21, 3.0, 0.0);
    const auto moved = track_features(a, b, detect_features(a, 30, 5.0));
    REQUIRE(moved.size() >= 5);
    for (const auto& p : moved) {
        CHECK(std::abs(p.to.x - p.from.x - 3.0) <= 0.5);
        CHECK(std::abs(p.to.y - p.from.y) <= 0.5);
    }
}

TEST_CASE("points on flat regions are dropped") {
    Frame f(48, 48);
    for (int y = 0; y < 48; ++y)
        for (int x = 0; x < 48; ++x) f.set(x, y, {100, 100, 100});
    const std::vector<FeaturePoint> pts{{24, 24, 1.0}, {10, 30, 1.0}};
    CHECK(track_features(f, f, pts).empty());
}

TEST_CASE("affine fit recovers exact transforms") {
    const auto id = estimate_affine(grid_pairs(AffineTransform::identity()));
    CHECK(std::abs(id.a - 1) < 1e-9);
    CHECK(std::abs(id.b) < 1e-9);
    CHECK(std::abs(id.tx) < 1e-9);
    CHECK(std::abs(id.d - 1) < 1e-9);

    AffineTransform tr;
    tr.tx = 5;
    tr.ty = -2;
    const auto t = estimate_affine(grid_pairs(tr));
    CHECK(std::abs(t.tx - 5) < 1e-6);
    CHECK(std::abs(t.ty + 2) < 1e-6);
    CHECK(std::abs(t.a - 1) < 1e-6);
    CHECK(std::abs(t.b) < 1e-6);
    CHECK(std::abs(t.c) < 1e-6);
    CHECK(std::abs(t.d - 1) < 1e-6);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 200; ++trial) {
        AffineTransform g{1 + 0.3 * u(rng), 0.3 * u(rng), 20 * u(rng), 0.3 * u(rng), 1 + 0.3 * u(rng), 20 * u(rng)};
        const auto f = estimate_affine(grid_pairs(g));
        CHECK(std::abs(f.a - g.a) < 1e-6);
        CHECK(std::abs(f.b - g.b) < 1e-6);
        CHECK(std::abs(f.tx - g.tx) < 1e-6);
        CHECK(std::abs(f.c - g.c) < 1e-6);
        CHECK(std::abs(f.d - g.d) < 1e-6);
        CHECK(std::abs(f.ty - g.ty) < 1e-6);
    }
}

TEST_CASE("ransac rejects outliers") {
    AffineTransform g{1.02, 0.01, 4, -0.01, 0.98, -3};
    auto pairs = grid_pairs(g);
    for (std::size_t i = 0; i < pairs.size(); i += 5) pairs[i].to.x += 40;
    const auto f = estimate_affine(pairs);
    CHECK(std::abs(f.tx - g.tx) < 1e-6);
    CHECK(std::abs(f.a - g.a) < 1e-6);
}

TEST_CASE("degenerate geometry") {
    CHECK_THROWS_AS(estimate_affine({{{0, 0}, {0, 0}}, {{1, 0}, {1, 0}}}), DegenerateGeometry);
    CHECK_THROWS_AS(estimate_affine({{{0, 0}, {0, 0}}, {{1, 1}, {1, 1}}, {{2, 2}, {2, 2}}, {{5, 5}, {5, 5}}}),
                    DegenerateGeometry);
    CHECK_THROWS_AS(fit_affine({{{0, 0}, {0, 0}}, {{1, 0}, {1, 0}}}), DegenerateGeometry);
}

TEST_CASE("camera routing on synthetic videos") {
    const auto t0 = std::chrono::steady_clock::now();
    const auto still = generate(make_linear_scene(128, 128, 30, {1.5, 0.5}, {0, 0}), 4);
    const auto d_still = classify_camera_motion(still.video);
    CHECK(d_still.route == MotionRoute::BackgroundSubtraction);
    CHECK(d_still.max_excursion < 0.5);

    const auto pan = generate(make_linear_scene(128, 128, 30, {2, 0}, {2, 0}), 4);
    const auto d_pan = classify_camera_motion(pan.video);
    CHECK(d_pan.route == MotionRoute::OpticalFlow);
    CHECK(d_pan.max_excursion == doctest::Approx(58.0).epsilon(0.03));
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(seconds < 10.0);
}

TEST_CASE("excursion is the furthest point, not the net displacement") {
    SceneScript s = make_linear_scene(128, 128, 21, {0, 0}, {0, 0});
    for (int t = 0; t < 21; ++t) s.camera[static_cast<std::size_t>(t)].tx = 2.0 * (t <= 10 ? t : 20 - t);
    const auto v = generate(s, 8);
    const auto d = classify_camera_motion(v.video);
    CHECK(d.max_excursion == doctest::Approx(20.0).epsilon(0.05));
    CHECK(d.route == MotionRoute::OpticalFlow);

    // Appending the reversed video leaves the furthest point unchanged.
    std::vector<Frame> frames = v.video.frames();
    const auto rev = v.video.reversed().frames();
    frames.insert(frames.end(), rev.begin() + 1, rev.end());
    const auto d2 = classify_camera_motion(VideoSequence(frames, "palindrome"));
    CHECK(d2.max_excursion == doctest::Approx(d.max_excursion).epsilon(0.05));
}

TEST_CASE("affine composition") {
    AffineTransform a{2, 0, 1, 0, 2, 0};
    AffineTransform b{1, 0, 3, 0, 1, -1};
    const auto ab = a.after(b);
    const Point2 p = ab.apply({1, 1});
    const Point2 q = a.apply(b.apply({1, 1}));
    CHECK(p.x == doctest::Approx(q.x));
    CHECK(p.y == doctest::Approx(q.y));
}
