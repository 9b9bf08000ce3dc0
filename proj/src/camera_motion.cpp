#include "vcos/camera_motion.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "vcos/errors.hpp"

namespace vcos {

AffineTransform AffineTransform::after(const AffineTransform& first) const {
    AffineTransform r;
    r.a = a * first.a + b * first.c;
    r.b = a * first.b + b * first.d;
    r.tx = a * first.tx + b * first.ty + tx;
    r.c = c * first.a + d * first.c;
    r.d = c * first.b + d * first.d;
    r.ty = c * first.tx + d * first.ty + ty;
    return r;
}

const char* to_string(MotionRoute route) {
    return route == MotionRoute::OpticalFlow ? "optical_flow" : "background_subtraction";
}

namespace {

// Single-channel float image with replicate-border bilinear sampling.
struct Plane {
    int width = 0;
    int height = 0;
    std::vector<float> v;

    float at(int x, int y) const {
        x = std::clamp(x, 0, width - 1);
        y = std::clamp(y, 0, height - 1);
        return v[static_cast<std::size_t>(y) * width + x];
    }

    float sample(double x, double y) const {
        const double fx = std::floor(x);
        const double fy = std::floor(y);
        const int x0 = static_cast<int>(fx);
        const int y0 = static_cast<int>(fy);
        const double ax = x - fx;
        const double ay = y - fy;
        const double top = (1 - ax) * at(x0, y0) + ax * at(x0 + 1, y0);
        const double bot = (1 - ax) * at(x0, y0 + 1) + ax * at(x0 + 1, y0 + 1);
        return static_cast<float>((1 - ay) * top + ay * bot);
    }
};

Plane downsample(const Plane& src) {
    static constexpr float k[5] = {1.f / 16, 4.f / 16, 6.f / 16, 4.f / 16, 1.f / 16};
    Plane tmp{src.width, src.height, std::vector<float>(src.v.size())};
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x) {
            float s = 0;
            for (int i = -2; i <= 2; ++i) s += k[i + 2] * src.at(x + i, y);
            tmp.v[static_cast<std::size_t>(y) * src.width + x] = s;
        }
    Plane out{(src.width + 1) / 2, (src.height + 1) / 2, {}};
    out.v.resize(static_cast<std::size_t>(out.width) * out.height);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) {
            float s = 0;
            for (int i = -2; i <= 2; ++i) s += k[i + 2] * tmp.at(2 * x, 2 * y + i);
            out.v[static_cast<std::size_t>(y) * out.width + x] = s;
        }
    return out;
}

struct Level {
    Plane image;
    Plane gx;
    Plane gy;
};

Level make_level(Plane image) {
    Level lv;
    lv.gx = {image.width, image.height, std::vector<float>(image.v.size())};
    lv.gy = lv.gx;
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) {
            const std::size_t p = static_cast<std::size_t>(y) * image.width + x;
            lv.gx.v[p] = 0.5f * (image.at(x + 1, y) - image.at(x - 1, y));
            lv.gy.v[p] = 0.5f * (image.at(x, y + 1) - image.at(x, y - 1));
        }
    lv.image = std::move(image);
    return lv;
}

std::vector<Level> build_pyramid(const Frame& frame, int levels) {
    std::vector<Level> pyr;
    Plane base{frame.width(), frame.height(), frame.luma()};
    pyr.push_back(make_level(base));
    for (int l = 1; l < levels; ++l) {
        const Plane& prev = pyr.back().image;
        if (prev.width < 8 || prev.height < 8) break;
        pyr.push_back(make_level(downsample(prev)));
    }
    return pyr;
}

double min_eigen_2x2(double gxx, double gxy, double gyy) {
    const double tr = 0.5 * (gxx + gyy);
    const double det = gxx * gyy - gxy * gxy;
    return tr - std::sqrt(std::max(0.0, tr * tr - det));
}

bool collinear(const std::vector<PointPair>& pairs) {
    if (pairs.size() < 3) return true;
    double mx = 0, my = 0;
    for (const auto& p : pairs) {
        mx += p.from.x;
        my += p.from.y;
    }
    mx /= static_cast<double>(pairs.size());
    my /= static_cast<double>(pairs.size());
    double sxx = 0, sxy = 0, syy = 0;
    for (const auto& p : pairs) {
        const double dx = p.from.x - mx;
        const double dy = p.from.y - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    const double lo = min_eigen_2x2(sxx, sxy, syy);
    const double hi = sxx + syy - lo;
    return !(lo > 1e-10 * std::max(1.0, hi));
}

bool triangle_degenerate(const Point2& a, const Point2& b, const Point2& c) {
    const double cross = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    return std::abs(cross) < 1e-6;
}

}  // namespace

// ---------------------------------------------------------------- features

std::vector<double> structure_tensor_scores(const std::vector<float>& gray, int width, int height) {
    std::vector<double> gx(gray.size(), 0.0), gy(gray.size(), 0.0), score(gray.size(), 0.0);
    auto idx = [width](int x, int y) { return static_cast<std::size_t>(y) * width + x; };
    for (int y = 1; y < height - 1; ++y)
        for (int x = 1; x < width - 1; ++x) {
            gx[idx(x, y)] = 0.5 * (gray[idx(x + 1, y)] - gray[idx(x - 1, y)]);
            gy[idx(x, y)] = 0.5 * (gray[idx(x, y + 1)] - gray[idx(x, y - 1)]);
        }
    for (int y = 2; y < height - 2; ++y)
        for (int x = 2; x < width - 2; ++x) {
            double sxx = 0, sxy = 0, syy = 0;
            for (int j = -1; j <= 1; ++j)
                for (int i = -1; i <= 1; ++i) {
                    const double ix = gx[idx(x + i, y + j)];
                    const double iy = gy[idx(x + i, y + j)];
                    sxx += ix * ix;
                    sxy += ix * iy;
                    syy += iy * iy;
                }
            score[idx(x, y)] = std::max(0.0, min_eigen_2x2(sxx, sxy, syy));
        }
    return score;
}

std::vector<FeaturePoint> detect_features(const Frame& frame, const FeatureParams& params) {
    if (frame.width() < 5 || frame.height() < 5) throw InvalidArgument("frame too small for feature detection");
    if (params.max_points < 1) throw InvalidArgument("max_points must be >= 1");
    const int w = frame.width();
    const auto scores = structure_tensor_scores(frame.luma(), w, frame.height());
    const double best = *std::max_element(scores.begin(), scores.end());
    if (best <= params.min_score) return {};
    const double floor = std::max(params.min_score, params.quality_level * best);

    std::vector<FeaturePoint> candidates;
    for (std::size_t p = 0; p < scores.size(); ++p) {
        if (scores[p] >= floor)
            candidates.push_back({static_cast<double>(p % w), static_cast<double>(p / w), scores[p]});
    }
    std::sort(candidates.begin(), candidates.end(), [](const FeaturePoint& a, const FeaturePoint& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.y != b.y) return a.y < b.y;
        return a.x < b.x;
    });

    const double min_d2 = params.min_distance * params.min_distance;
    std::vector<FeaturePoint> selected;
    for (const auto& c : candidates) {
        const bool clear = std::none_of(selected.begin(), selected.end(), [&](const FeaturePoint& s) {
            const double dx = s.x - c.x, dy = s.y - c.y;
            return dx * dx + dy * dy < min_d2;
        });
        if (clear) selected.push_back(c);
        if (static_cast<int>(selected.size()) >= params.max_points) break;
    }
    return selected;
}

std::vector<FeaturePoint> detect_features(const Frame& frame, int max_points, double min_distance) {
    FeatureParams params;
    params.max_points = max_points;
    params.min_distance = min_distance;
    return detect_features(frame, params);
}

// ---------------------------------------------------------------- tracking

std::vector<PointPair> track_features(const Frame& prev, const Frame& curr, const std::vector<FeaturePoint>& points,
                                      const TrackerParams& params) {
    if (!prev.same_size(curr)) throw DimensionMismatch("tracked frames differ in size");
    const auto pyr_prev = build_pyramid(prev, params.pyramid_levels);
    const auto pyr_curr = build_pyramid(curr, params.pyramid_levels);
    const int levels = static_cast<int>(std::min(pyr_prev.size(), pyr_curr.size()));
    const int half = params.window / 2;
    const double n_win = static_cast<double>((2 * half + 1) * (2 * half + 1));

    std::vector<PointPair> out;
    for (const auto& pt : points) {
        double gx = 0, gy = 0;  // displacement guess at the current level
        bool lost = false;
        for (int l = levels - 1; l >= 0; --l) {
            const Level& I = pyr_prev[static_cast<std::size_t>(l)];
            const Level& J = pyr_curr[static_cast<std::size_t>(l)];
            const double scale = std::ldexp(1.0, -l);
            const double px = pt.x * scale, py = pt.y * scale;

            double gxx = 0, gxy = 0, gyy = 0;
            for (int j = -half; j <= half; ++j)
                for (int i = -half; i <= half; ++i) {
                    const double ix = I.gx.sample(px + i, py + j);
                    const double iy = I.gy.sample(px + i, py + j);
                    gxx += ix * ix;
                    gxy += ix * iy;
                    gyy += iy * iy;
                }
            const double det = gxx * gyy - gxy * gxy;
            if (min_eigen_2x2(gxx, gxy, gyy) / n_win < params.min_eigen || det <= 0) {
                if (l == 0) lost = true;
                if (l > 0) {
                    gx *= 2;
                    gy *= 2;
                }
                continue;
            }

            double vx = 0, vy = 0;
            for (int it = 0; it < params.max_iterations; ++it) {
                double bx = 0, by = 0;
                for (int j = -half; j <= half; ++j)
                    for (int i = -half; i <= half; ++i) {
                        const double diff = I.image.sample(px + i, py + j) -
                                            J.image.sample(px + i + gx + vx, py + j + gy + vy);
                        bx += diff * I.gx.sample(px + i, py + j);
                        by += diff * I.gy.sample(px + i, py + j);
                    }
                const double sx = (gyy * bx - gxy * by) / det;
                const double sy = (gxx * by - gxy * bx) / det;
                vx += sx;
                vy += sy;
                if (sx * sx + sy * sy < params.epsilon * params.epsilon) break;
            }
            if (l > 0) {
                gx = 2 * (gx + vx);
                gy = 2 * (gy + vy);
            } else {
                gx += vx;
                gy += vy;
            }
        }
        if (lost) continue;

        const double nx = pt.x + gx, ny = pt.y + gy;
        if (!(nx >= 0 && ny >= 0 && nx <= prev.width() - 1 && ny <= prev.height() - 1)) continue;

        const Level& I0 = pyr_prev.front();
        const Level& J0 = pyr_curr.front();
        double residual = 0;
        for (int j = -half; j <= half; ++j)
            for (int i = -half; i <= half; ++i)
                residual += std::abs(I0.image.sample(pt.x + i, pt.y + j) - J0.image.sample(nx + i, ny + j));
        if (residual / n_win > params.max_residual) continue;

        out.push_back({{pt.x, pt.y}, {nx, ny}});
    }
    return out;
}

// ---------------------------------------------------------------- affine

AffineTransform fit_affine(const std::vector<PointPair>& pairs) {
    if (pairs.size() < 3) throw DegenerateGeometry("affine fit needs at least 3 point pairs");
    if (collinear(pairs)) throw DegenerateGeometry("affine fit points are collinear");

    // Center the source points for conditioning.
    double mx = 0, my = 0;
    for (const auto& p : pairs) {
        mx += p.from.x;
        my += p.from.y;
    }
    mx /= static_cast<double>(pairs.size());
    my /= static_cast<double>(pairs.size());

    const auto n = static_cast<Eigen::Index>(pairs.size());
    Eigen::MatrixXd A(n, 3);
    Eigen::MatrixXd B(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& p = pairs[static_cast<std::size_t>(i)];
        A(i, 0) = p.from.x - mx;
        A(i, 1) = p.from.y - my;
        A(i, 2) = 1.0;
        B(i, 0) = p.to.x;
        B(i, 1) = p.to.y;
    }
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    if (qr.rank() < 3) throw DegenerateGeometry("affine system is rank deficient");
    const Eigen::MatrixXd X = qr.solve(B);

    AffineTransform t;
    t.a = X(0, 0);
    t.b = X(1, 0);
    t.c = X(0, 1);
    t.d = X(1, 1);
    t.tx = X(2, 0) - t.a * mx - t.b * my;
    t.ty = X(2, 1) - t.c * mx - t.d * my;
    return t;
}

AffineTransform estimate_affine(const std::vector<PointPair>& pairs, const RansacParams& params) {
    if (pairs.size() < 3) throw DegenerateGeometry("affine estimation needs at least 3 point pairs");
    if (collinear(pairs)) throw DegenerateGeometry("all point pairs are collinear");
    if (pairs.size() == 3) return fit_affine(pairs);

    const double thr2 = params.inlier_threshold * params.inlier_threshold;
    auto inliers_of = [&](const AffineTransform& t) {
        std::vector<PointPair> in;
        for (const auto& p : pairs) {
            const Point2 q = t.apply(p.from);
            const double dx = q.x - p.to.x, dy = q.y - p.to.y;
            if (dx * dx + dy * dy <= thr2) in.push_back(p);
        }
        return in;
    };

    std::mt19937_64 rng(params.seed);
    std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1);
    std::vector<PointPair> best_inliers;
    const int iterations = std::max(params.iterations, 100);
    for (int it = 0; it < iterations; ++it) {
        const std::size_t i0 = pick(rng), i1 = pick(rng), i2 = pick(rng);
        if (i0 == i1 || i0 == i2 || i1 == i2) continue;
        if (triangle_degenerate(pairs[i0].from, pairs[i1].from, pairs[i2].from)) continue;
        AffineTransform candidate;
        try {
            candidate = fit_affine({pairs[i0], pairs[i1], pairs[i2]});
        } catch (const DegenerateGeometry&) {
            continue;
        }
        auto in = inliers_of(candidate);
        if (in.size() > best_inliers.size()) best_inliers = std::move(in);
        if (best_inliers.size() == pairs.size()) break;
    }

    if (best_inliers.size() < 3 || collinear(best_inliers)) return fit_affine(pairs);
    // Refit on the consensus set, then once more on its inliers.
    AffineTransform refit = fit_affine(best_inliers);
    auto final_in = inliers_of(refit);
    if (final_in.size() >= 3 && !collinear(final_in)) refit = fit_affine(final_in);

    // A slowly moving object can sit inside the inlier gate and bend the fit.
    // Shrink the gate to the consensus set's own robust residual scale.
    std::size_t kept = final_in.size();
    for (int pass = 0; pass < 3; ++pass) {
        std::vector<double> residuals;
        for (const auto& p : pairs) {
            const Point2 q = refit.apply(p.from);
            const double r = std::hypot(q.x - p.to.x, q.y - p.to.y);
            if (r <= params.inlier_threshold) residuals.push_back(r);
        }
        if (residuals.size() < 3) break;
        auto mid = residuals.begin() + static_cast<std::ptrdiff_t>(residuals.size() / 2);
        std::nth_element(residuals.begin(), mid, residuals.end());
        const double gate = std::clamp(3.0 * 1.4826 * *mid, 0.25, params.inlier_threshold);
        std::vector<PointPair> tight;
        for (const auto& p : pairs) {
            const Point2 q = refit.apply(p.from);
            if (std::hypot(q.x - p.to.x, q.y - p.to.y) <= gate) tight.push_back(p);
        }
        if (tight.size() < 3 || tight.size() == kept || collinear(tight)) break;
        kept = tight.size();
        refit = fit_affine(tight);
    }
    return refit;
}

// ---------------------------------------------------------------- routing

RouteDecision classify_camera_motion(const VideoSequence& seq, const CameraMotionParams& params) {
    RouteDecision decision;
    const Point2 center{seq.width() / 2.0, seq.height() / 2.0};
    AffineTransform cumulative = AffineTransform::identity();

    for (int i = 0; i + 1 < seq.size(); ++i) {
        ++decision.pair_count;
        AffineTransform step = AffineTransform::identity();
        try {
            const auto features = detect_features(seq.frame(i), params.features);
            const auto pairs = track_features(seq.frame(i), seq.frame(i + 1), features, params.tracker);
            step = estimate_affine(pairs, params.ransac);
        } catch (const DegenerateGeometry&) {
            ++decision.degenerate_pairs;
            step = AffineTransform::identity();
        }
        cumulative = step.after(cumulative);
        const Point2 moved = cumulative.apply(center);
        decision.max_excursion = std::max(decision.max_excursion, std::hypot(moved.x - center.x, moved.y - center.y));
    }

    const double diagonal = std::hypot(seq.width(), seq.height());
    if (2 * decision.degenerate_pairs > decision.pair_count) {
        decision.route = MotionRoute::OpticalFlow;
    } else {
        decision.route = decision.max_excursion < params.theta_cam_frac * diagonal ? MotionRoute::BackgroundSubtraction
                                                                                  : MotionRoute::OpticalFlow;
    }
    return decision;
}

}  // namespace vcos
