#include "vcos/motion_cues.hpp"

#include <algorithm>
#include <cmath>

#include "vcos/errors.hpp"

namespace vcos {

IntensityMap::IntensityMap(int width, int height, double fill) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) throw InvalidArgument("intensity dimensions must be positive");
    values_.assign(static_cast<std::size_t>(width) * height, fill);
}

IntensityMap::IntensityMap(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
    if (width <= 0 || height <= 0) throw InvalidArgument("intensity dimensions must be positive");
    if (values_.size() != static_cast<std::size_t>(width) * height)
        throw InvalidArgument("intensity buffer length must be width*height");
}

IntensityMap normalize_to_byte_range(int width, int height, std::span<const double> raw, double lo, double hi) {
    const double range = hi - lo;
    std::vector<double> out(raw.size(), 0.0);
    if (range >= 1e-12) {
        for (std::size_t p = 0; p < raw.size(); ++p)
            out[p] = std::clamp((raw[p] - lo) / range * 255.0, 0.0, 255.0);
    }
    return IntensityMap(width, height, std::move(out));
}

IntensityMap normalize_to_byte_range(int width, int height, std::span<const double> raw) {
    if (raw.empty()) throw InvalidArgument("empty intensity input");
    const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
    return normalize_to_byte_range(width, height, raw, *lo, *hi);
}

// ---------------------------------------------------------------- flow cues

FlowField subtract_mean_flow(const FlowField& flow) {
    const std::size_t n = flow.pixel_count();
    double sx = 0, sy = 0;
    for (std::size_t p = 0; p < n; ++p) {
        sx += flow.dx(p);
        sy += flow.dy(p);
    }
    const double mx = sx / static_cast<double>(n);
    const double my = sy / static_cast<double>(n);
    FlowField out(flow.width(), flow.height());
    for (std::size_t p = 0; p < n; ++p)
        out.set(p, static_cast<float>(flow.dx(p) - mx), static_cast<float>(flow.dy(p) - my));
    return out;
}

FlowEma::FlowEma(double momentum) : momentum_(momentum) {
    if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidArgument("momentum must lie in [0, 1)");
}

FlowField FlowEma::apply(const FlowField& flow, int i) {
    if (i < 1) throw InvalidArgument("flow index must be >= 1");
    if (i == 1 || !primed_) {
        ema_ = flow;
        primed_ = true;
        return ema_;
    }
    if (!flow.same_size(ema_)) throw DimensionMismatch("flow field size differs from momentum state");
    auto dst = ema_.data();
    const auto src = flow.data();
    for (std::size_t k = 0; k < dst.size(); ++k)
        dst[k] = static_cast<float>((1.0 - momentum_) * src[k] + momentum_ * dst[k]);
    return ema_;
}

std::vector<double> flow_magnitude(const FlowField& flow) {
    std::vector<double> raw(flow.pixel_count());
    for (std::size_t p = 0; p < raw.size(); ++p) raw[p] = std::hypot(double{flow.dx(p)}, double{flow.dy(p)});
    return raw;
}

IntensityMap flow_intensity(const FlowField& flow) {
    const auto raw = flow_magnitude(flow);
    return normalize_to_byte_range(flow.width(), flow.height(), raw);
}

// ---------------------------------------------------------------- background model

BackgroundModel::BackgroundModel(BgsParams params) : params_(params) {
    if (params_.k < 1) throw InvalidArgument("bgs.k must be >= 1");
    if (!(params_.alpha > 0.0 && params_.alpha <= 1.0)) throw InvalidArgument("bgs.alpha must lie in (0, 1]");
    if (params_.var_floor <= 0.0) throw InvalidArgument("bgs.var_floor must be positive");
    params_.var_init = std::max(params_.var_init, params_.var_floor);
}

std::span<const BackgroundModel::Component> BackgroundModel::components_at(int x, int y) const {
    const std::size_t k = static_cast<std::size_t>(params_.k);
    return std::span<const Component>(comps_).subspan((static_cast<std::size_t>(y) * width_ + x) * k, k);
}

Frame BackgroundModel::update(const Frame& frame) {
    const std::size_t k = static_cast<std::size_t>(params_.k);
    if (!initialized()) {
        width_ = frame.width();
        height_ = frame.height();
        comps_.assign(static_cast<std::size_t>(width_) * height_ * k, Component{});
        for (std::size_t p = 0; p < static_cast<std::size_t>(width_) * height_; ++p) {
            Component& c = comps_[p * k];
            c.weight = 1.0;
            c.var = params_.var_init;
            for (int ch = 0; ch < 3; ++ch) c.mean[ch] = frame.pixels()[3 * p + ch];
        }
        return frame;
    }
    if (frame.width() != width_ || frame.height() != height_)
        throw DimensionMismatch("frame size differs from background model");

    const double alpha = params_.alpha;
    const double gate = params_.match_sigmas * params_.match_sigmas;
    Frame background(width_, height_, frame.index());
    auto bg = background.pixels();
    const auto px = frame.pixels();

    for (std::size_t p = 0; p < static_cast<std::size_t>(width_) * height_; ++p) {
        Component* c = &comps_[p * k];
        const double x[3] = {static_cast<double>(px[3 * p]), static_cast<double>(px[3 * p + 1]), static_cast<double>(px[3 * p + 2])};

        // Nearest live component in Mahalanobis distance, accepted within the gate.
        std::ptrdiff_t match = -1;
        double best = 0;
        for (std::size_t j = 0; j < k; ++j) {
            if (c[j].weight <= 0) continue;
            double d2 = 0;
            for (int ch = 0; ch < 3; ++ch) d2 += (x[ch] - c[j].mean[ch]) * (x[ch] - c[j].mean[ch]);
            const double m = d2 / c[j].var;
            if (m < gate && (match < 0 || m < best)) {
                match = static_cast<std::ptrdiff_t>(j);
                best = m;
            }
        }

        for (std::size_t j = 0; j < k; ++j) c[j].weight *= (1.0 - alpha);
        if (match >= 0) {
            Component& m = c[match];
            m.weight += alpha;
            double d2 = 0;
            for (int ch = 0; ch < 3; ++ch) {
                const double diff = x[ch] - m.mean[ch];
                m.mean[ch] += alpha * diff;
                d2 += diff * diff;
            }
            m.var = std::max(params_.var_floor, m.var + alpha * (d2 - m.var));
        } else {
            std::size_t lowest = 0;
            for (std::size_t j = 1; j < k; ++j)
                if (c[j].weight < c[lowest].weight) lowest = j;
            Component& r = c[lowest];
            r.weight = alpha;
            r.var = params_.var_init;
            for (int ch = 0; ch < 3; ++ch) r.mean[ch] = x[ch];
        }

        double total = 0;
        for (std::size_t j = 0; j < k; ++j) total += c[j].weight;
        for (std::size_t j = 0; j < k; ++j) c[j].weight /= total;

        std::size_t lead = 0;
        for (std::size_t j = 1; j < k; ++j)
            if (c[j].weight > c[lead].weight) lead = j;
        for (int ch = 0; ch < 3; ++ch)
            bg[3 * p + ch] = static_cast<std::uint8_t>(std::clamp(std::lround(c[lead].mean[ch]), 0L, 255L));
    }
    return background;
}

std::vector<double> frame_difference(const Frame& frame, const Frame& background) {
    if (!frame.same_size(background)) throw DimensionMismatch("frame and background differ in size");
    const auto a = frame.pixels();
    const auto b = background.pixels();
    std::vector<double> raw(static_cast<std::size_t>(frame.width()) * frame.height());
    for (std::size_t p = 0; p < raw.size(); ++p) {
        double s = 0;
        for (int ch = 0; ch < 3; ++ch) s += std::abs(static_cast<double>(a[3 * p + ch]) - static_cast<double>(b[3 * p + ch]));
        raw[p] = s;
    }
    return raw;
}

IntensityMap bgs_intensity(const Frame& frame, const Frame& background) {
    const auto raw = frame_difference(frame, background);
    return normalize_to_byte_range(frame.width(), frame.height(), raw);
}

HighlightedFrame blend_highlight(const Frame& frame, const IntensityMap& intensity, Rgb color) {
    if (frame.width() != intensity.width() || frame.height() != intensity.height())
        throw DimensionMismatch("intensity map does not match frame");
    Frame out = frame;
    auto dst = out.pixels();
    const double target[3] = {static_cast<double>(color.r), static_cast<double>(color.g), static_cast<double>(color.b)};
    for (std::size_t p = 0; p < intensity.values().size(); ++p) {
        const double w = std::clamp(intensity[p] / 255.0, 0.0, 1.0);
        if (w == 0.0) continue;
        for (int ch = 0; ch < 3; ++ch) {
            const double v = (1.0 - w) * dst[3 * p + ch] + w * target[ch];
            dst[3 * p + ch] = static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
        }
    }
    return {std::move(out), color};
}

}  // namespace vcos
