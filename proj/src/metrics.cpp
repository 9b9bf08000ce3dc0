#include "vcos/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "vcos/errors.hpp"
#include "vcos/image_codec.hpp"

namespace vcos {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

template <typename A, typename B>
void require_same_size(const A& a, const B& b) {
    if (a.width() != b.width() || a.height() != b.height())
        throw DimensionMismatch("prediction and ground truth differ in size");
}

bool any_positive(const SoftMap& m) {
    return std::any_of(m.values().begin(), m.values().end(), [](double v) { return v > 0; });
}

// MATLAB round(): halves go away from zero.
double round_half_away(double v) { return std::round(v); }

}  // namespace

const char* const kEmptyGroundTruthRule =
    "empty ground truth: similarity metrics are 1 when the prediction is also empty and 0 otherwise; "
    "MAE is the plain mean absolute difference";

// ---------------------------------------------------------------- SoftMap

SoftMap::SoftMap(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
    if (width <= 0 || height <= 0) throw InvalidArgument("soft map dimensions must be positive");
    if (values_.size() != static_cast<std::size_t>(width) * height)
        throw InvalidArgument("soft map buffer length must be width*height");
}

SoftMap::SoftMap(const BinaryMask& mask) : width_(mask.width()), height_(mask.height()) {
    values_.resize(mask.pixel_count());
    for (std::size_t p = 0; p < values_.size(); ++p) values_[p] = mask[p] ? 1.0 : 0.0;
}

SoftMap read_soft_map(const fs::path& path) {
    const GrayImage img = read_gray(path);
    std::vector<double> v(img.values.size());
    for (std::size_t p = 0; p < v.size(); ++p) v[p] = img.values[p] / 255.0;
    return SoftMap(img.width, img.height, std::move(v));
}

BinaryMask binarize(const SoftMap& soft, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw InvalidArgument("binarization threshold must lie in (0, 1)");
    BinaryMask out(soft.width(), soft.height());
    for (std::size_t p = 0; p < soft.pixel_count(); ++p) out.set(p, soft[p] >= threshold);
    return out;
}

// ---------------------------------------------------------------- names

const char* to_string(Metric m) {
    switch (m) {
        case Metric::IoU: return "iou";
        case Metric::Dice: return "dice";
        case Metric::Mae: return "mae";
        case Metric::SMeasure: return "s_measure";
        case Metric::EMeasure: return "e_measure";
        case Metric::WeightedF: return "weighted_f";
    }
    return "?";
}

bool higher_is_better(Metric m) { return m != Metric::Mae; }

bool pixel_poolable(Metric m) { return m == Metric::IoU || m == Metric::Dice || m == Metric::Mae; }

const char* to_string(AggregationMode m) {
    switch (m) {
        case AggregationMode::FrameThenVideo: return "frame_then_video";
        case AggregationMode::FramePooled: return "frame_pooled";
        case AggregationMode::PixelPooled: return "pixel_pooled";
    }
    return "?";
}

AggregationMode parse_aggregation_mode(const std::string& s) {
    if (s == "frame_then_video" || s == "FrameThenVideo") return AggregationMode::FrameThenVideo;
    if (s == "frame_pooled" || s == "FramePooled") return AggregationMode::FramePooled;
    if (s == "pixel_pooled" || s == "PixelPooled") return AggregationMode::PixelPooled;
    throw ConfigError("unknown aggregation mode '" + s + "'");
}

// ---------------------------------------------------------------- overlap metrics

PixelCounts count_pixels(const BinaryMask& pred, const BinaryMask& gt) {
    require_same_size(pred, gt);
    PixelCounts c;
    c.pixels = gt.pixel_count();
    for (std::size_t p = 0; p < c.pixels; ++p) {
        const bool a = pred[p], b = gt[p];
        c.intersection += a && b;
        c.union_ += a || b;
        c.pred += a;
        c.gt += b;
        c.abs_diff += a != b ? 1.0 : 0.0;
    }
    return c;
}

namespace {

double iou_from(const PixelCounts& c) {
    if (c.gt == 0) return c.pred == 0 ? 1.0 : 0.0;
    return static_cast<double>(c.intersection) / static_cast<double>(c.union_);
}

double dice_from(const PixelCounts& c) {
    if (c.gt == 0) return c.pred == 0 ? 1.0 : 0.0;
    return 2.0 * static_cast<double>(c.intersection) / static_cast<double>(c.pred + c.gt);
}

}  // namespace

double frame_iou(const BinaryMask& pred, const BinaryMask& gt) { return iou_from(count_pixels(pred, gt)); }

double frame_dice(const BinaryMask& pred, const BinaryMask& gt) { return dice_from(count_pixels(pred, gt)); }

double frame_mae(const BinaryMask& pred, const BinaryMask& gt) {
    const auto c = count_pixels(pred, gt);
    return c.abs_diff / static_cast<double>(c.pixels);
}

double frame_mae(const SoftMap& pred, const BinaryMask& gt) {
    require_same_size(pred, gt);
    double s = 0;
    for (std::size_t p = 0; p < pred.pixel_count(); ++p) s += std::abs(pred[p] - (gt[p] ? 1.0 : 0.0));
    return s / static_cast<double>(pred.pixel_count());
}

// ---------------------------------------------------------------- S-measure

namespace {

double object_score(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sigma = values.size() > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
    return 2.0 * mean / (mean * mean + 1.0 + sigma + kEps);
}

double s_object(const SoftMap& pred, const BinaryMask& gt) {
    std::vector<double> fg, bg;
    for (std::size_t p = 0; p < pred.pixel_count(); ++p) {
        if (gt[p])
            fg.push_back(pred[p]);
        else
            bg.push_back(1.0 - pred[p]);
    }
    const double u = static_cast<double>(fg.size()) / static_cast<double>(pred.pixel_count());
    return u * object_score(fg) + (1.0 - u) * object_score(bg);
}

// SSIM-style similarity of one rectangular block.
double block_ssim(const SoftMap& pred, const BinaryMask& gt, int x0, int y0, int x1, int y1) {
    const int n = (x1 - x0) * (y1 - y0);
    if (n <= 0) return 0.0;
    double mx = 0, my = 0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            mx += pred.at(x, y);
            my += gt.at(x, y) ? 1.0 : 0.0;
        }
    mx /= n;
    my /= n;
    double sxx = 0, syy = 0, sxy = 0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            const double dx = pred.at(x, y) - mx;
            const double dy = (gt.at(x, y) ? 1.0 : 0.0) - my;
            sxx += dx * dx;
            syy += dy * dy;
            sxy += dx * dy;
        }
    const double denom = n - 1 + kEps;
    sxx /= denom;
    syy /= denom;
    sxy /= denom;
    const double alpha = 4 * mx * my * sxy;
    const double beta = (mx * mx + my * my) * (sxx + syy);
    if (alpha != 0) return alpha / (beta + kEps);
    if (beta == 0) return 1.0;
    return 0.0;
}

double s_region(const SoftMap& pred, const BinaryMask& gt) {
    const int w = gt.width(), h = gt.height();
    double total = 0, sx = 0, sy = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (gt.at(x, y)) {
                total += 1;
                sx += x + 1;
                sy += y + 1;
            }
    // 1-based centroid; the split puts columns [0, cx) left and rows [0, cy) on top.
    const int cx = static_cast<int>(round_half_away(sx / total));
    const int cy = static_cast<int>(round_half_away(sy / total));
    const double area = static_cast<double>(w) * h;
    const double w1 = cx * cy / area;
    const double w2 = (w - cx) * cy / area;
    const double w3 = cx * (h - cy) / area;
    const double w4 = 1.0 - w1 - w2 - w3;
    return w1 * block_ssim(pred, gt, 0, 0, cx, cy) + w2 * block_ssim(pred, gt, cx, 0, w, cy) +
           w3 * block_ssim(pred, gt, 0, cy, cx, h) + w4 * block_ssim(pred, gt, cx, cy, w, h);
}

}  // namespace

double s_measure(const SoftMap& pred, const BinaryMask& gt) {
    require_same_size(pred, gt);
    const std::size_t g = gt.count();
    if (g == 0) return any_positive(pred) ? 0.0 : 1.0;
    if (g == gt.pixel_count()) {
        return std::accumulate(pred.values().begin(), pred.values().end(), 0.0) /
               static_cast<double>(pred.pixel_count());
    }
    const double q = 0.5 * s_object(pred, gt) + 0.5 * s_region(pred, gt);
    return std::max(q, 0.0);
}

// ---------------------------------------------------------------- E-measure

double e_measure(const BinaryMask& pred, const BinaryMask& gt) {
    require_same_size(pred, gt);
    const std::size_t n = gt.pixel_count();
    const std::size_t g = gt.count();
    if (g == 0) return pred.empty() ? 1.0 : 0.0;
    if (g == n) return static_cast<double>(pred.count()) / static_cast<double>(n);

    const double mu_p = static_cast<double>(pred.count()) / static_cast<double>(n);
    const double mu_g = static_cast<double>(g) / static_cast<double>(n);
    double sum = 0;
    for (std::size_t p = 0; p < n; ++p) {
        const double ap = (pred[p] ? 1.0 : 0.0) - mu_p;
        const double ag = (gt[p] ? 1.0 : 0.0) - mu_g;
        const double align = 2.0 * ap * ag / (ap * ap + ag * ag + kEps);
        sum += (align + 1.0) * (align + 1.0) / 4.0;
    }
    return sum / static_cast<double>(n);
}

// ---------------------------------------------------------------- weighted F

namespace {

struct Nearest {
    std::vector<double> distance;     // Euclidean distance to the closest foreground pixel
    std::vector<std::size_t> index;   // that pixel's linear index (ties: smallest index)
};

// Exact nearest-foreground transform. Only foreground pixels with a background
// 4-neighbor can be nearest to a background pixel, so the search is limited
// to those, bucketed by row.
Nearest nearest_foreground(const BinaryMask& gt) {
    const int w = gt.width(), h = gt.height();
    std::vector<std::vector<int>> rows(static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!gt.at(x, y)) continue;
            const bool edge = (x > 0 && !gt.at(x - 1, y)) || (x + 1 < w && !gt.at(x + 1, y)) ||
                              (y > 0 && !gt.at(x, y - 1)) || (y + 1 < h && !gt.at(x, y + 1));
            if (edge) rows[static_cast<std::size_t>(y)].push_back(x);
        }

    Nearest out{std::vector<double>(gt.pixel_count(), 0.0), std::vector<std::size_t>(gt.pixel_count(), 0)};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t self = static_cast<std::size_t>(y) * w + x;
            if (gt.at(x, y)) {
                out.index[self] = self;
                continue;
            }
            long best_d2 = std::numeric_limits<long>::max();
            std::size_t best_idx = 0;
            auto consider = [&](int cx, int cy) {
                const long dx = cx - x, dy = cy - y;
                const long d2 = dx * dx + dy * dy;
                const std::size_t idx = static_cast<std::size_t>(cy) * w + cx;
                if (d2 < best_d2 || (d2 == best_d2 && idx < best_idx)) {
                    best_d2 = d2;
                    best_idx = idx;
                }
            };
            for (int dy = 0; dy < h; ++dy) {
                if (static_cast<long>(dy) * dy > best_d2) break;
                for (int cy : {y - dy, y + dy}) {
                    if (cy < 0 || cy >= h || (dy == 0 && cy != y)) continue;
                    const auto& xs = rows[static_cast<std::size_t>(cy)];
                    if (xs.empty()) continue;
                    auto it = std::lower_bound(xs.begin(), xs.end(), x);
                    if (it != xs.end()) consider(*it, cy);
                    if (it != xs.begin()) consider(*std::prev(it), cy);
                    if (dy == 0) break;
                }
            }
            out.distance[self] = std::sqrt(static_cast<double>(best_d2));
            out.index[self] = best_idx;
        }
    return out;
}

// 7x7 Gaussian, sigma 5, normalized to unit sum.
std::array<double, 49> gaussian_kernel() {
    std::array<double, 49> k{};
    double sum = 0;
    for (int j = -3; j <= 3; ++j)
        for (int i = -3; i <= 3; ++i) {
            const double v = std::exp(-(i * i + j * j) / (2.0 * 25.0));
            k[static_cast<std::size_t>((j + 3) * 7 + (i + 3))] = v;
            sum += v;
        }
    for (auto& v : k) v /= sum;
    return k;
}

}  // namespace

double weighted_f(const SoftMap& pred, const BinaryMask& gt) {
    require_same_size(pred, gt);
    const std::size_t g = gt.count();
    const bool pred_any = any_positive(pred);
    if (g == 0) return pred_any ? 0.0 : 1.0;
    if (!pred_any) return 0.0;

    const int w = gt.width(), h = gt.height();
    const std::size_t n = gt.pixel_count();
    std::vector<double> err(n);
    for (std::size_t p = 0; p < n; ++p) err[p] = std::abs(pred[p] - (gt[p] ? 1.0 : 0.0));

    const Nearest nearest = nearest_foreground(gt);
    // Background pixels inherit the error of their nearest foreground pixel.
    std::vector<double> et(n);
    for (std::size_t p = 0; p < n; ++p) et[p] = gt[p] ? err[p] : err[nearest.index[p]];

    static const auto kernel = gaussian_kernel();
    std::vector<double> ea(n, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0;
            for (int j = -3; j <= 3; ++j) {
                const int yy = y + j;
                if (yy < 0 || yy >= h) continue;
                for (int i = -3; i <= 3; ++i) {
                    const int xx = x + i;
                    if (xx < 0 || xx >= w) continue;
                    s += kernel[static_cast<std::size_t>((j + 3) * 7 + (i + 3))] *
                         et[static_cast<std::size_t>(yy) * w + xx];
                }
            }
            ea[static_cast<std::size_t>(y) * w + x] = s;
        }

    double tp_err = 0, fp_w = 0, err_fg = 0;
    for (std::size_t p = 0; p < n; ++p) {
        if (gt[p]) {
            const double m = ea[p] < err[p] ? ea[p] : err[p];
            tp_err += m;
            err_fg += m;
        } else {
            const double b = 2.0 - std::exp(std::log(0.5) / 5.0 * nearest.distance[p]);
            fp_w += err[p] * b;
        }
    }
    const double tpw = static_cast<double>(g) - tp_err;
    const double recall = 1.0 - err_fg / static_cast<double>(g);
    const double precision = tpw / (kEps + tpw + fp_w);
    const double q = 2.0 * recall * precision / (kEps + recall + precision);
    return std::clamp(q, 0.0, 1.0);
}

// ---------------------------------------------------------------- per-frame and aggregation

double FrameScore::value(Metric m) const {
    switch (m) {
        case Metric::IoU: return iou;
        case Metric::Dice: return dice;
        case Metric::Mae: return mae;
        case Metric::SMeasure: return s_measure;
        case Metric::EMeasure: return e_measure;
        case Metric::WeightedF: return weighted_f;
    }
    return 0;
}

FrameScore score_frame(const BinaryMask& pred, const BinaryMask& gt, int frame) {
    FrameScore s;
    s.frame = frame;
    s.counts = count_pixels(pred, gt);
    s.iou = iou_from(s.counts);
    s.dice = dice_from(s.counts);
    s.mae = s.counts.abs_diff / static_cast<double>(s.counts.pixels);
    const SoftMap soft(pred);
    s.s_measure = vcos::s_measure(soft, gt);
    s.e_measure = vcos::e_measure(pred, gt);
    s.weighted_f = vcos::weighted_f(soft, gt);
    return s;
}

double aggregate(const std::vector<std::vector<FrameScore>>& per_video, Metric metric, AggregationMode mode) {
    std::size_t frames = 0;
    for (const auto& v : per_video) frames += v.size();
    if (frames == 0) throw InvalidArgument("aggregation needs at least one frame");

    switch (mode) {
        case AggregationMode::FrameThenVideo: {
            double sum = 0;
            int videos = 0;
            for (const auto& v : per_video) {
                if (v.empty()) continue;
                double s = 0;
                for (const auto& f : v) s += f.value(metric);
                sum += s / static_cast<double>(v.size());
                ++videos;
            }
            return sum / videos;
        }
        case AggregationMode::FramePooled: {
            double sum = 0;
            for (const auto& v : per_video)
                for (const auto& f : v) sum += f.value(metric);
            return sum / static_cast<double>(frames);
        }
        case AggregationMode::PixelPooled: {
            if (!pixel_poolable(metric))
                throw UnsupportedCombination(std::string("pixel pooling is undefined for ") + to_string(metric));
            PixelCounts total;
            for (const auto& v : per_video)
                for (const auto& f : v) {
                    total.intersection += f.counts.intersection;
                    total.union_ += f.counts.union_;
                    total.pred += f.counts.pred;
                    total.gt += f.counts.gt;
                    total.abs_diff += f.counts.abs_diff;
                    total.pixels += f.counts.pixels;
                }
            if (metric == Metric::IoU) return iou_from(total);
            if (metric == Metric::Dice) return dice_from(total);
            return total.abs_diff / static_cast<double>(total.pixels);
        }
    }
    return 0;
}

// ---------------------------------------------------------------- detection success rate

std::optional<BoundingBox> largest_component_box(const BinaryMask& mask) {
    const int w = mask.width(), h = mask.height();
    std::vector<int> label(mask.pixel_count(), -1);
    std::vector<std::size_t> stack;
    std::size_t best_size = 0;
    std::optional<BoundingBox> best;
    int next = 0;
    for (std::size_t start = 0; start < mask.pixel_count(); ++start) {
        if (!mask[start] || label[start] >= 0) continue;
        int x0 = w, y0 = h, x1 = -1, y1 = -1;
        std::size_t size = 0;
        stack.assign(1, start);
        label[start] = next;
        while (!stack.empty()) {
            const std::size_t p = stack.back();
            stack.pop_back();
            const int x = static_cast<int>(p % w), y = static_cast<int>(p / w);
            ++size;
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int nx = x + dx, ny = y + dy;
                    if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                    const std::size_t q = static_cast<std::size_t>(ny) * w + nx;
                    if (mask[q] && label[q] < 0) {
                        label[q] = next;
                        stack.push_back(q);
                    }
                }
        }
        ++next;
        if (size > best_size) {
            best_size = size;
            best = BoundingBox{double(x0), double(y0), double(x1 + 1), double(y1 + 1)};
        }
    }
    return best;
}

double detection_success_rate(const std::map<int, std::optional<BoundingBox>>& pred,
                              const std::map<int, BoundingBox>& gt, double tau) {
    if (!(tau > 0.0 && tau <= 1.0)) throw InvalidArgument("success-rate tau must lie in (0, 1]");
    if (gt.empty()) throw InvalidArgument("no annotated frames for success rate");
    std::size_t hits = 0;
    for (const auto& [frame, box] : gt) {
        const auto it = pred.find(frame);
        if (it != pred.end() && it->second && box_iou(*it->second, box) >= tau) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(gt.size());
}

// ---------------------------------------------------------------- dataset evaluation

double VideoEval::mean(Metric m) const {
    if (frames.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0;
    for (const auto& f : frames) s += f.value(m);
    return s / static_cast<double>(frames.size());
}

std::optional<double> EvalReport::headline(Metric m) const {
    const auto it = aggregates.find(flags.mode);
    if (it == aggregates.end()) return std::nullopt;
    const auto jt = it->second.find(m);
    return jt == it->second.end() ? std::nullopt : jt->second;
}

EvalReport evaluate_dataset(const std::map<std::string, MaskSeries>& preds,
                            const std::map<std::string, GroundTruth>& gts, const EvalFlags& flags) {
    EvalReport report;
    report.flags = flags;
    for (const auto& [id, _] : preds)
        if (!gts.count(id)) report.warnings.push_back("prediction for unknown video '" + id + "' ignored");

    std::size_t box_frames = 0, box_hits = 0;
    for (const auto& [id, gt] : gts) {
        VideoEval ve;
        ve.video = id;
        const auto pit = preds.find(id);
        ve.missing_prediction = pit == preds.end();
        if (ve.missing_prediction)
            report.warnings.push_back("no prediction for video '" + id + "'; scored as empty masks");

        auto mask_frames = gt.masks;
        if (flags.omit_last_frame && !mask_frames.empty()) mask_frames.erase(std::prev(mask_frames.end()));
        for (const auto& [frame, gmask] : mask_frames) {
            const BinaryMask* pmask = nullptr;
            if (!ve.missing_prediction) {
                const auto mit = pit->second.masks.find(frame);
                if (mit != pit->second.masks.end()) pmask = &mit->second;
            }
            const BinaryMask empty(gmask.width(), gmask.height());
            ve.frames.push_back(score_frame(pmask ? *pmask : empty, gmask, frame));
        }

        auto box_gt = gt.boxes;
        if (flags.omit_last_frame && !box_gt.empty()) box_gt.erase(std::prev(box_gt.end()));
        if (!box_gt.empty()) {
            std::map<int, std::optional<BoundingBox>> pred_boxes;
            if (!ve.missing_prediction)
                for (const auto& [frame, _] : box_gt) {
                    const auto mit = pit->second.masks.find(frame);
                    if (mit != pit->second.masks.end()) pred_boxes[frame] = largest_component_box(mit->second);
                }
            ve.success_rate = detection_success_rate(pred_boxes, box_gt, flags.dsr_tau);
            ve.box_frames = box_gt.size();
            ve.box_hits = static_cast<std::size_t>(std::llround(*ve.success_rate * box_gt.size()));
            box_frames += ve.box_frames;
            box_hits += ve.box_hits;
        }
        report.videos.push_back(std::move(ve));
    }

    std::vector<std::vector<FrameScore>> per_video;
    for (const auto& v : report.videos) per_video.push_back(v.frames);
    const bool any_frames = std::any_of(per_video.begin(), per_video.end(), [](const auto& v) { return !v.empty(); });
    for (AggregationMode mode : kAllModes)
        for (Metric m : kAllMetrics) {
            std::optional<double> value;
            if (any_frames && (mode != AggregationMode::PixelPooled || pixel_poolable(m)))
                value = aggregate(per_video, m, mode);
            report.aggregates[mode][m] = value;
        }

    if (box_frames > 0) {
        double sum = 0;
        int n = 0;
        for (const auto& v : report.videos)
            if (v.success_rate) {
                sum += *v.success_rate;
                ++n;
            }
        report.success_rate[AggregationMode::FrameThenVideo] = sum / n;
        report.success_rate[AggregationMode::FramePooled] =
            static_cast<double>(box_hits) / static_cast<double>(box_frames);
        report.success_rate[AggregationMode::PixelPooled] = std::nullopt;
    }
    return report;
}

}  // namespace vcos
