#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include "test_support.hpp"
#include "vcos/errors.hpp"
#include "vcos/image_codec.hpp"
#include "vcos/video_model.hpp"

using namespace vcos;
using vcos::testing::TempDir;

TEST_CASE("flow file round trip is bit exact") {
    TempDir dir("flow");
    FlowField f(2, 2);
    for (std::size_t p = 0; p < 4; ++p) f.set(p, 1.0f, -2.0f);
    write_flow_file(f, dir / "a.flo");
    CHECK(read_flow_file(dir / "a.flo") == f);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<float> u(-1e6f, 1e6f);
    for (int trial = 0; trial < 50; ++trial) {
        FlowField g(1 + trial % 7, 1 + trial % 5);
        for (auto& v : g.data()) v = u(rng);
        g.data()[0] = std::numeric_limits<float>::denorm_min();
        g.data()[1] = -0.0f;
        const auto bytes = encode_flow(g);
        const FlowField back = decode_flow(bytes);
        REQUIRE(back.width() == g.width());
        REQUIRE(back.height() == g.height());
        CHECK(std::memcmp(back.data().data(), g.data().data(), g.data().size() * sizeof(float)) == 0);
    }
}

TEST_CASE("flow payload length and layout") {
    FlowField f(3, 1);
    f.set(1, 3, 4);
    f.set(2, -3, -4);
    const auto bytes = encode_flow(f);
    CHECK(bytes.size() == 4 + 8 + 24);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "PIEH");
    std::int32_t w = 0, h = 0;
    std::memcpy(&w, bytes.data() + 4, 4);
    std::memcpy(&h, bytes.data() + 8, 4);
    CHECK(w == 3);
    CHECK(h == 1);
    float v = 0;
    std::memcpy(&v, bytes.data() + 12 + 8, 4);
    CHECK(v == 3.0f);
}

TEST_CASE("flow decode rejects bad magic and truncation") {
    FlowField f(2, 2);
    auto bytes = encode_flow(f);
    auto bad = bytes;
    std::memcpy(bad.data(), "XXXX", 4);
    CHECK_THROWS_AS(decode_flow(bad), FormatError);
    bytes.pop_back();
    CHECK_THROWS_AS(decode_flow(bytes), FormatError);
    CHECK_THROWS_AS(decode_flow(std::vector<std::uint8_t>{'P', 'I'}), FormatError);
}

TEST_CASE("mask series save and load are exact") {
    TempDir dir("masks");
    std::mt19937_64 rng(11);
    MaskSeries s;
    s.video_id = "v";
    s.masks[0] = BinaryMask(9, 7);
    s.masks[5] = BinaryMask(9, 7, true);
    s.masks[10] = vcos::testing::random_mask(rng, 9, 7, 0.4);
    save_mask_series(s, dir.path());
    CHECK(fs::exists(dir / "00000.png"));
    CHECK(fs::exists(dir / "00010.png"));

    const auto empty = read_gray(dir / "00000.png");
    CHECK(std::all_of(empty.values.begin(), empty.values.end(), [](auto v) { return v == 0; }));
    const auto full = read_gray(dir / "00005.png");
    CHECK(std::all_of(full.values.begin(), full.values.end(), [](auto v) { return v == 255; }));

    const MaskSeries back = load_mask_series(dir.path());
    CHECK(back.masks == s.masks);
    const GroundTruth gt = load_ground_truth(dir.path());
    REQUIRE(gt.masks.size() == 3);
    CHECK(gt.masks.at(10) == s.masks.at(10));
}

TEST_CASE("ground truth thresholds at 128") {
    TempDir dir("gt");
    Frame f(4, 3);
    f.set(2, 1, {200, 200, 200});
    f.set(0, 0, {127, 127, 127});
    write_png(f, dir / "00000.png");
    const GroundTruth gt = load_ground_truth(dir.path());
    REQUIRE(gt.masks.size() == 1);
    CHECK(gt.masks.at(0).count() == 1);
    CHECK(gt.masks.at(0).at(2, 1));
    CHECK_THROWS_AS(load_ground_truth(dir.path(), 5, std::pair{5, 5}), DimensionMismatch);
    TempDir none("none");
    CHECK_THROWS(load_ground_truth(none.path()));
}

TEST_CASE("load_sequence orders frames by filename and prefers the images subdirectory") {
    TempDir dir("seq");
    fs::create_directories(dir / "vid/Imgs");
    for (int i : {2, 0, 1}) {
        Frame f(5, 4);
        f.set(0, 0, {static_cast<std::uint8_t>(i * 10), 0, 0});
        write_png(f, dir.path() / "vid/Imgs" / frame_filename(i));
    }
    const VideoSequence seq = load_sequence(dir / "vid");
    REQUIRE(seq.size() == 3);
    CHECK(seq.source_id() == "vid");
    for (int i = 0; i < 3; ++i) {
        CHECK(seq.frame(i).index() == i);
        CHECK(seq.frame(i).at(0, 0).r == i * 10);
    }
    const VideoSequence again = load_sequence(dir / "vid");
    CHECK(again.frames() == seq.frames());

    const VideoSequence rev = seq.reversed();
    CHECK(rev.frame(0).at(0, 0).r == 20);
    CHECK(rev.frame(0).index() == 0);
}

TEST_CASE("boxes csv round trip and box iou") {
    TempDir dir("boxes");
    std::map<int, BoundingBox> boxes{{0, {1, 2, 10, 12}}, {5, {0.5, 0, 3, 4.25}}};
    save_boxes_csv(boxes, dir / "boxes.csv");
    CHECK(load_boxes_csv(dir / "boxes.csv") == boxes);

    CHECK(box_iou({0, 0, 10, 10}, {0, 0, 10, 10}) == doctest::Approx(1.0));
    CHECK(box_iou({0, 0, 10, 10}, {10, 0, 20, 10}) == 0.0);
    CHECK(box_iou({0, 0, 10, 10}, {5, 0, 15, 10}) == doctest::Approx(50.0 / 150.0));
}

TEST_CASE("mask series validation") {
    MaskSeries s;
    s.masks[0] = BinaryMask(3, 3);
    s.masks[1] = BinaryMask(4, 3);
    CHECK_THROWS_AS(s.validate(), DimensionMismatch);
    MaskSeries neg;
    neg.masks[-1] = BinaryMask(3, 3);
    CHECK_THROWS_AS(neg.validate(), InvalidArgument);
}
