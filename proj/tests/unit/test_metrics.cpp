#include <doctest.h>

#include <cmath>
#include <random>

#include "test_support.hpp"
#include "vcos/errors.hpp"
#include "vcos/metrics.hpp"

using namespace vcos;
using vcos::testing::random_mask;
using vcos::testing::rect_mask;
namespace ref = vcos::testing::reference;

namespace {

// gt with at least one foreground and one background pixel.
BinaryMask mixed_mask(std::mt19937_64& rng, int w, int h) {
    for (;;) {
        const auto m = random_mask(rng, w, h, 0.15 + 0.6 * (rng() % 100) / 100.0);
        if (m.count() > 0 && m.count() < m.pixel_count()) return m;
    }
}

FrameScore counts_frame(std::size_t inter, std::size_t uni) {
    // A 4x4 frame with the requested intersection and union: gt takes the
    // intersection plus half of the remainder, pred takes the intersection plus the other half.
    BinaryMask gt(4, 4), pred(4, 4);
    std::size_t p = 0;
    for (; p < inter; ++p) {
        gt.set(p, true);
        pred.set(p, true);
    }
    for (std::size_t q = 0; p < uni; ++p, ++q) (q % 2 == 0 ? gt : pred).set(p, true);
    return score_frame(pred, gt);
}

}  // namespace

TEST_CASE("binarize boundary") {
    CHECK(binarize(SoftMap(2, 1, {0.6, 0.6}), 0.5).count() == 2);
    CHECK(binarize(SoftMap(2, 1, {0.5, 0.5}), 0.5).count() == 2);
    const auto m = binarize(SoftMap(2, 1, {0.49, 0.51}), 0.5);
    CHECK_FALSE(m[0]);
    CHECK(m[1]);
    CHECK_THROWS_AS(binarize(SoftMap(1, 1, {0.5}), 1.0), InvalidArgument);
}

TEST_CASE("overlap metric examples") {
    const auto g = rect_mask(10, 10, 0, 0, 5, 2);
    CHECK(frame_iou(g, g) == 1.0);
    CHECK(frame_dice(g, g) == 1.0);
    CHECK(frame_mae(g, g) == 0.0);

    const auto disjoint = rect_mask(10, 10, 0, 5, 5, 7);
    CHECK(frame_iou(disjoint, g) == 0.0);
    CHECK(frame_dice(disjoint, g) == 0.0);
    CHECK(frame_mae(disjoint, g) == doctest::Approx(0.2));

    const auto bigger = rect_mask(10, 10, 0, 0, 5, 4);
    CHECK(frame_iou(bigger, g) == doctest::Approx(0.5));
    CHECK(frame_dice(bigger, g) == doctest::Approx(2.0 / 3.0));

    const BinaryMask empty(10, 10);
    CHECK(frame_iou(empty, empty) == 1.0);
    CHECK(frame_dice(empty, empty) == 1.0);
    CHECK(frame_iou(g, empty) == 0.0);
    CHECK(frame_dice(g, empty) == 0.0);
    CHECK_THROWS_AS(frame_iou(BinaryMask(3, 3), BinaryMask(4, 3)), DimensionMismatch);
}

TEST_CASE("perfect predictions score the extreme") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 200; ++trial) {
        const auto gt = random_mask(rng, 3 + trial % 17, 3 + trial % 13, 0.05 + (trial % 9) / 10.0);
        const auto s = score_frame(gt, gt);
        CHECK(s.iou == 1.0);
        CHECK(s.dice == 1.0);
        CHECK(s.mae == 0.0);
        CHECK(s.s_measure == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(s.e_measure == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(s.weighted_f == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("iou never exceeds dice") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto a = random_mask(rng, 12, 9, 0.4);
        const auto b = random_mask(rng, 12, 9, 0.4);
        const double iou = frame_iou(a, b), dice = frame_dice(a, b);
        CHECK(iou <= dice + 1e-15);
        if (b.count() > 0) CHECK(iou == doctest::Approx(dice / (2 - dice)));
    }
}

TEST_CASE("structure measure matches the reference on random 8x8 instances") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const auto gt = mixed_mask(rng, 8, 8);
        const auto pred = trial % 4 == 0 ? SoftMap(random_mask(rng, 8, 8, 0.5)) : vcos::testing::random_soft(rng, 8, 8);
        const double got = s_measure(pred, gt);
        const double want = ref::s_measure(ref::to_matrix(pred), ref::to_matrix(gt));
        CHECK(std::abs(got - want) <= 1e-9);
    }
}

TEST_CASE("enhanced alignment matches the reference on random 8x8 instances") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        const auto gt = mixed_mask(rng, 8, 8);
        const auto pred = random_mask(rng, 8, 8, 0.5);
        const double got = e_measure(pred, gt);
        const double want = ref::e_measure(ref::to_matrix(pred), ref::to_matrix(gt));
        CHECK(std::abs(got - want) <= 1e-9);
    }
}

TEST_CASE("weighted F matches the reference on random 8x8 instances") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const auto gt = mixed_mask(rng, 8, 8);
        const auto pred = trial % 3 == 0 ? SoftMap(random_mask(rng, 8, 8, 0.5)) : vcos::testing::random_soft(rng, 8, 8);
        const double got = weighted_f(pred, gt);
        const double want = ref::weighted_f(ref::to_matrix(pred), ref::to_matrix(gt));
        CHECK(std::abs(got - want) <= 1e-9);
    }
}

TEST_CASE("soft metrics on larger random instances stay in range and match the reference") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const auto gt = rect_mask(24, 20, 3 + trial % 5, 4, 15, 12 + trial % 6);
        const auto pred = vcos::testing::random_soft(rng, 24, 20);
        const auto bin = binarize(pred, 0.5);
        const double s = s_measure(pred, gt), e = e_measure(bin, gt), f = weighted_f(pred, gt);
        for (double v : {s, e, f}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        CHECK(std::abs(s - ref::s_measure(ref::to_matrix(pred), ref::to_matrix(gt))) <= 1e-9);
        CHECK(std::abs(e - ref::e_measure(ref::to_matrix(bin), ref::to_matrix(gt))) <= 1e-9);
        CHECK(std::abs(f - ref::weighted_f(ref::to_matrix(pred), ref::to_matrix(gt))) <= 1e-9);
    }
}

TEST_CASE("inverted predictions score lower") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const auto gt = mixed_mask(rng, 10, 10);
        BinaryMask inv(10, 10);
        for (std::size_t p = 0; p < inv.pixel_count(); ++p) inv.set(p, !gt[p]);
        CHECK(s_measure(SoftMap(inv), gt) < s_measure(SoftMap(gt), gt));
        CHECK(e_measure(inv, gt) < e_measure(gt, gt));
        CHECK(weighted_f(SoftMap(inv), gt) < weighted_f(SoftMap(gt), gt));
    }
    const auto gt = rect_mask(8, 8, 2, 2, 6, 6);
    CHECK(weighted_f(SoftMap(BinaryMask(8, 8)), gt) == 0.0);
}

TEST_CASE("empty ground truth rule") {
    const BinaryMask empty(6, 6);
    const auto some = rect_mask(6, 6, 1, 1, 3, 3);
    const auto both = score_frame(empty, empty);
    CHECK(both.iou == 1.0);
    CHECK(both.s_measure == 1.0);
    CHECK(both.e_measure == 1.0);
    CHECK(both.weighted_f == 1.0);
    CHECK(both.mae == 0.0);
    const auto fp = score_frame(some, empty);
    CHECK(fp.iou == 0.0);
    CHECK(fp.dice == 0.0);
    CHECK(fp.s_measure == 0.0);
    CHECK(fp.e_measure == 0.0);
    CHECK(fp.weighted_f == 0.0);
    CHECK(fp.mae == doctest::Approx(4.0 / 36.0));
}

TEST_CASE("aggregation modes") {
    // Single frame: all modes agree.
    const auto one = counts_frame(3, 7);
    for (Metric m : {Metric::IoU, Metric::Dice, Metric::Mae}) {
        const double a = aggregate({{one}}, m, AggregationMode::FrameThenVideo);
        CHECK(aggregate({{one}}, m, AggregationMode::FramePooled) == a);
        CHECK(aggregate({{one}}, m, AggregationMode::PixelPooled) == a);
    }

    // Video A {1.0}, video B {0, 0}.
    const auto hit = counts_frame(2, 2);
    const auto miss = counts_frame(0, 4);
    CHECK(hit.iou == 1.0);
    CHECK(miss.iou == 0.0);
    CHECK(aggregate({{hit}, {miss, miss}}, Metric::IoU, AggregationMode::FrameThenVideo) == 0.5);
    CHECK(aggregate({{hit}, {miss, miss}}, Metric::IoU, AggregationMode::FramePooled) == doctest::Approx(1.0 / 3.0));

    // Counts (1,1) and (0,9): per-frame mean 0.5, pooled 1/10.
    const auto f1 = counts_frame(1, 1), f2 = counts_frame(0, 9);
    CHECK(f1.counts.intersection == 1);
    CHECK(f2.counts.union_ == 9);
    CHECK(aggregate({{f1, f2}}, Metric::IoU, AggregationMode::FrameThenVideo) == 0.5);
    CHECK(aggregate({{f1, f2}}, Metric::IoU, AggregationMode::PixelPooled) == 0.1);

    CHECK_THROWS_AS(aggregate({{f1}}, Metric::SMeasure, AggregationMode::PixelPooled), UnsupportedCombination);
    CHECK_THROWS_AS(aggregate({{}}, Metric::IoU, AggregationMode::FramePooled), InvalidArgument);
    CHECK(parse_aggregation_mode("pixel_pooled") == AggregationMode::PixelPooled);
    CHECK_THROWS_AS(parse_aggregation_mode("median"), ConfigError);
}

TEST_CASE("largest component box") {
    BinaryMask m(10, 10);
    m.set(0, 0, true);
    for (int i = 3; i < 7; ++i) m.set(i, i, true);  // diagonal, 8-connected
    const auto b = largest_component_box(m);
    REQUIRE(b);
    CHECK(*b == BoundingBox{3, 3, 7, 7});
    CHECK_FALSE(largest_component_box(BinaryMask(4, 4)).has_value());
}

TEST_CASE("detection success rate") {
    std::map<int, BoundingBox> gt;
    std::map<int, std::optional<BoundingBox>> same, none, shifted;
    for (int f = 0; f < 10; ++f) {
        gt[f] = {0, 0, 10, 10};
        same[f] = gt[f];
        // Shift by s along x gives IoU (10 - s) / (10 + s): 2.5 -> 0.6, 30/7 -> 0.4.
        shifted[f] = f % 2 == 0 ? BoundingBox{2.5, 0, 12.5, 10} : BoundingBox{30.0 / 7, 0, 10 + 30.0 / 7, 10};
    }
    CHECK(detection_success_rate(same, gt, 0.5) == 1.0);
    CHECK(detection_success_rate(none, gt, 0.5) == 0.0);
    CHECK(box_iou(*shifted[0], gt[0]) == doctest::Approx(0.6));
    CHECK(box_iou(*shifted[1], gt[1]) == doctest::Approx(0.4));
    CHECK(detection_success_rate(shifted, gt, 0.5) == 0.5);
    CHECK_THROWS_AS(detection_success_rate(same, {}, 0.5), InvalidArgument);
    CHECK_THROWS_AS(detection_success_rate(same, gt, 0.0), InvalidArgument);
}

TEST_CASE("success rate is monotone in tau and matches brute force counting") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0, 20);
    for (int trial = 0; trial < 200; ++trial) {
        std::map<int, BoundingBox> gt;
        std::map<int, std::optional<BoundingBox>> pred;
        for (int f = 0; f < 12; ++f) {
            const double x = u(rng), y = u(rng);
            gt[f] = {x, y, x + 5 + u(rng), y + 5 + u(rng)};
            if (rng() % 4 != 0) {
                const double px = x + u(rng) / 4 - 2.5, py = y + u(rng) / 4 - 2.5;
                pred[f] = BoundingBox{px, py, px + 5 + u(rng), py + 5 + u(rng)};
            }
        }
        double prev = 1.0;
        for (double tau = 0.05; tau <= 1.0; tau += 0.05) {
            const double sr = detection_success_rate(pred, gt, tau);
            CHECK(sr <= prev);
            prev = sr;
            int hits = 0;
            for (const auto& [f, b] : gt)
                if (pred.count(f) && pred[f] && box_iou(*pred[f], b) >= tau) ++hits;
            CHECK(sr == doctest::Approx(hits / 12.0));
        }
    }
}

TEST_CASE("dataset evaluation") {
    std::map<std::string, GroundTruth> gts;
    std::map<std::string, MaskSeries> preds;
    for (const std::string id : {"b", "a"}) {
        GroundTruth g;
        g.video_id = id;
        for (int f : {0, 5, 10}) {
            g.masks[f] = rect_mask(12, 12, f / 5, 2, 6 + f / 5, 8);
            g.boxes[f] = *largest_component_box(g.masks[f]);
        }
        gts[id] = g;
        preds[id] = MaskSeries{id, g.masks};
    }
    const auto perfect = evaluate_dataset(preds, gts, {});
    REQUIRE(perfect.videos.size() == 2);
    CHECK(perfect.videos[0].video == "a");
    for (AggregationMode mode : kAllModes) {
        CHECK(*perfect.aggregates.at(mode).at(Metric::IoU) == 1.0);
        CHECK(*perfect.aggregates.at(mode).at(Metric::Mae) == 0.0);
    }
    CHECK(*perfect.headline(Metric::SMeasure) == doctest::Approx(1.0));
    CHECK(*perfect.success_rate.at(AggregationMode::FrameThenVideo) == 1.0);
    CHECK(perfect.warnings.empty());

    // Only the last annotated frame of video a is wrong.
    auto wrong = preds;
    wrong["a"].masks[10] = BinaryMask(12, 12);
    const auto with_last = evaluate_dataset(wrong, gts, {});
    CHECK(*with_last.headline(Metric::IoU) == doctest::Approx((2.0 / 3.0 + 1.0) / 2.0));
    EvalFlags omit;
    omit.omit_last_frame = true;
    const auto without_last = evaluate_dataset(wrong, gts, omit);
    CHECK(*without_last.headline(Metric::IoU) == 1.0);
    CHECK(without_last.videos[0].frames.size() == 2);

    // Missing prediction: scored as empty with a warning, not a crash.
    auto missing = preds;
    missing.erase("b");
    const auto r = evaluate_dataset(missing, gts, {});
    CHECK(r.videos[1].missing_prediction);
    CHECK(r.videos[1].mean(Metric::IoU) == 0.0);
    CHECK(*r.headline(Metric::IoU) == 0.5);
    CHECK_FALSE(r.warnings.empty());
    CHECK(*r.success_rate.at(AggregationMode::FramePooled) == 0.5);
}
