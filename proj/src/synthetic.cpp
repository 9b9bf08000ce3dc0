#include "vcos/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vcos/errors.hpp"
#include "vcos/image_codec.hpp"

namespace vcos {

using nlohmann::json;

namespace {

std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double lattice(std::uint64_t seed, int channel, int octave, long ix, long iy) {
    std::uint64_t h = mix(seed ^ mix(static_cast<std::uint64_t>(channel) * 131 + static_cast<std::uint64_t>(octave)));
    h = mix(h ^ static_cast<std::uint64_t>(ix));
    h = mix(h ^ static_cast<std::uint64_t>(iy) * 0x632be59bd9b4e019ULL);
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

// Multi-octave value noise in [0, 1].
double value_noise(const TextureSpec& tex, std::uint64_t seed, int channel, double wx, double wy) {
    double sum = 0;
    double norm = 0;
    double amp = 1.0;
    double cell = tex.scale;
    for (int o = 0; o < tex.octaves; ++o) {
        const double u = wx / cell;
        const double v = wy / cell;
        const double fu = std::floor(u);
        const double fv = std::floor(v);
        const auto ix = static_cast<long>(fu);
        const auto iy = static_cast<long>(fv);
        const double tx = smooth(u - fu);
        const double ty = smooth(v - fv);
        const double a = lattice(seed, channel, o, ix, iy);
        const double b = lattice(seed, channel, o, ix + 1, iy);
        const double c = lattice(seed, channel, o, ix, iy + 1);
        const double d = lattice(seed, channel, o, ix + 1, iy + 1);
        sum += amp * ((a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty);
        norm += amp;
        amp *= 0.5;
        cell *= 0.5;
    }
    return sum / norm;
}

bool shape_covers(Shape shape, double w, double h, double dx, double dy) {
    if (shape == Shape::Ellipse) {
        const double ex = dx / (w / 2);
        const double ey = dy / (h / 2);
        return ex * ex + ey * ey <= 1.0;
    }
    return std::abs(dx) < w / 2 && std::abs(dy) < h / 2;
}

std::uint8_t quantize(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

const char* shape_name(Shape s) { return s == Shape::Ellipse ? "ellipse" : "rectangle"; }

Shape parse_shape(const std::string& s) {
    if (s == "ellipse") return Shape::Ellipse;
    if (s == "rectangle") return Shape::Rectangle;
    throw FormatError("unknown shape '" + s + "'");
}

json point_json(Point2 p) { return json::array({p.x, p.y}); }

Point2 point_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

std::optional<BoundingBox> tight_box(const BinaryMask& m) {
    int x0 = m.width(), y0 = m.height(), x1 = -1, y1 = -1;
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x)
            if (m.at(x, y)) {
                x0 = std::min(x0, x);
                y0 = std::min(y0, y);
                x1 = std::max(x1, x);
                y1 = std::max(y1, y);
            }
    if (x1 < 0) return std::nullopt;
    return BoundingBox{static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x1 + 1),
                       static_cast<double>(y1 + 1)};
}

}  // namespace

void SceneScript::validate() const {
    if (width < 16 || height < 16) throw InvalidArgument("canvas must be at least 16x16");
    if (frame_count < 2) throw InvalidArgument("a scene needs at least 2 frames");
    if (static_cast<int>(object_steps.size()) != frame_count)
        throw InvalidArgument("object trajectory length must equal the frame count");
    if (static_cast<int>(camera.size()) != frame_count)
        throw InvalidArgument("camera trajectory length must equal the frame count");
    if (!(object.width > 0 && object.height > 0)) throw InvalidArgument("object size must be positive");
    if (std::abs(object.contrast_delta) > 5.0) throw InvalidArgument("object contrast delta must be within 5");
    for (const auto& c : camera)
        if (std::abs(c.determinant()) < 1e-9) throw InvalidArgument("camera transform is singular");
    if (texture.octaves < 1 || !(texture.scale > 0)) throw InvalidArgument("invalid texture spec");
}

Point2 SceneScript::object_center(int t) const {
    Point2 c = object.start;
    for (int k = 0; k <= t; ++k) {
        c.x += object_steps[static_cast<std::size_t>(k)].x;
        c.y += object_steps[static_cast<std::size_t>(k)].y;
    }
    return c;
}

SceneScript make_linear_scene(int width, int height, int frame_count, Point2 object_velocity, Point2 camera_velocity) {
    SceneScript s;
    s.width = width;
    s.height = height;
    s.frame_count = frame_count;
    s.object.start = {width / 2.0, height / 2.0};
    s.object_steps.assign(static_cast<std::size_t>(frame_count), object_velocity);
    s.object_steps[0] = {0, 0};
    for (int t = 0; t < frame_count; ++t) {
        AffineTransform a;
        a.tx = camera_velocity.x * t;
        a.ty = camera_velocity.y * t;
        s.camera.push_back(a);
    }
    return s;
}

AffineTransform invert(const AffineTransform& t) {
    const double det = t.determinant();
    if (std::abs(det) < 1e-15) throw DegenerateGeometry("affine transform is singular");
    AffineTransform r;
    r.a = t.d / det;
    r.b = -t.b / det;
    r.c = -t.c / det;
    r.d = t.a / det;
    r.tx = -(r.a * t.tx + r.b * t.ty);
    r.ty = -(r.c * t.tx + r.d * t.ty);
    return r;
}

std::array<double, 3> texture_color(const TextureSpec& tex, std::uint64_t seed, double wx, double wy) {
    const double n = value_noise(tex, seed, 0, wx, wy) - 0.5;
    const double chroma = value_noise(tex, seed, 1, wx * 0.5, wy * 0.5) - 0.5;
    const double swing = tex.contrast;
    return {tex.base.r + swing * n + 16.0 * chroma, tex.base.g + swing * 0.9 * n,
            tex.base.b + swing * 0.75 * n - 12.0 * chroma};
}

bool object_covers(const SceneScript& script, int t, double wx, double wy) {
    const Point2 c = script.object_center(t);
    return shape_covers(script.object.shape, script.object.width, script.object.height, wx - c.x, wy - c.y);
}

BinaryMask render_object_mask(const SceneScript& script, int t) {
    BinaryMask m(script.width, script.height);
    const AffineTransform& cam = script.camera[static_cast<std::size_t>(t)];
    const Point2 c = script.object_center(t);
    for (int y = 0; y < script.height; ++y)
        for (int x = 0; x < script.width; ++x) {
            const Point2 w = cam.apply({static_cast<double>(x), static_cast<double>(y)});
            m.set(x, y, shape_covers(script.object.shape, script.object.width, script.object.height, w.x - c.x, w.y - c.y));
        }
    return m;
}

FlowField analytic_flow(const SceneScript& script, int a, int b) {
    script.validate();
    if (a < 0 || b < 0 || a >= script.frame_count || b >= script.frame_count)
        throw InvalidArgument("flow frame index out of range");
    const AffineTransform& cam_a = script.camera[static_cast<std::size_t>(a)];
    const AffineTransform inv_b = invert(script.camera[static_cast<std::size_t>(b)]);
    const Point2 ca = script.object_center(a);
    const Point2 cb = script.object_center(b);
    FlowField flow(script.width, script.height);
    for (int y = 0; y < script.height; ++y)
        for (int x = 0; x < script.width; ++x) {
            Point2 w = cam_a.apply({static_cast<double>(x), static_cast<double>(y)});
            if (shape_covers(script.object.shape, script.object.width, script.object.height, w.x - ca.x, w.y - ca.y)) {
                w.x += cb.x - ca.x;
                w.y += cb.y - ca.y;
            }
            const Point2 p = inv_b.apply(w);
            flow.set(static_cast<std::size_t>(y) * script.width + x, static_cast<float>(p.x - x),
                     static_cast<float>(p.y - y));
        }
    return flow;
}

SyntheticVideo generate(const SceneScript& script, std::uint64_t seed) {
    script.validate();
    const Point2 start = script.object.start;
    std::vector<Frame> frames;
    GroundTruth gt;
    gt.video_id = script.name;

    for (int t = 0; t < script.frame_count; ++t) {
        const AffineTransform& cam = script.camera[static_cast<std::size_t>(t)];
        const AffineTransform inv = invert(cam);
        const Point2 c = script.object_center(t);

        // Conservative containment: every corner of the object's world box must land on the canvas.
        const double hw = script.object.width / 2;
        const double hh = script.object.height / 2;
        for (const Point2 corner : {Point2{c.x - hw, c.y - hh}, Point2{c.x + hw, c.y - hh}, Point2{c.x - hw, c.y + hh},
                                    Point2{c.x + hw, c.y + hh}}) {
            const Point2 p = inv.apply(corner);
            if (p.x < -0.5 || p.y < -0.5 || p.x > script.width - 0.5 || p.y > script.height - 0.5)
                throw InvalidArgument("object leaves the canvas at frame " + std::to_string(t));
        }

        Frame f(script.width, script.height, t);
        BinaryMask mask(script.width, script.height);
        for (int y = 0; y < script.height; ++y)
            for (int x = 0; x < script.width; ++x) {
                const Point2 w = cam.apply({static_cast<double>(x), static_cast<double>(y)});
                std::array<double, 3> col;
                if (shape_covers(script.object.shape, script.object.width, script.object.height, w.x - c.x, w.y - c.y)) {
                    col = texture_color(script.texture, seed, w.x - (c.x - start.x) + script.object.texture_offset.x,
                                        w.y - (c.y - start.y) + script.object.texture_offset.y);
                    for (auto& v : col) v += script.object.contrast_delta;
                    mask.set(x, y, true);
                } else {
                    col = texture_color(script.texture, seed, w.x, w.y);
                    for (const auto& d : script.distractors)
                        if (shape_covers(d.shape, d.width, d.height, w.x - d.center.x, w.y - d.center.y)) {
                            col = texture_color(script.texture, seed, w.x + d.texture_offset.x,
                                                w.y + d.texture_offset.y);
                            for (auto& v : col) v += d.contrast_delta;
                            break;
                        }
                }
                f.set(x, y, Rgb{quantize(col[0]), quantize(col[1]), quantize(col[2])});
            }
        if (const auto box = tight_box(mask)) gt.boxes.emplace(t, *box);
        gt.masks.emplace(t, std::move(mask));
        frames.push_back(std::move(f));
    }

    std::vector<FlowField> flows;
    for (int t = 0; t + 1 < script.frame_count; ++t) flows.push_back(analytic_flow(script, t, t + 1));
    return {VideoSequence(std::move(frames), script.name), std::move(gt), std::move(flows)};
}

// ---------------------------------------------------------------- serialization

json scene_to_json(const SceneScript& s, std::uint64_t seed) {
    json steps = json::array();
    for (const auto& p : s.object_steps) steps.push_back(point_json(p));
    json cams = json::array();
    for (const auto& c : s.camera) cams.push_back(json::array({c.a, c.b, c.tx, c.c, c.d, c.ty}));
    json distractors = json::array();
    for (const auto& d : s.distractors)
        distractors.push_back({{"shape", shape_name(d.shape)},
                               {"size", json::array({d.width, d.height})},
                               {"center", point_json(d.center)},
                               {"contrast_delta", d.contrast_delta},
                               {"texture_offset", point_json(d.texture_offset)}});
    return {{"name", s.name},
            {"seed", seed},
            {"width", s.width},
            {"height", s.height},
            {"frame_count", s.frame_count},
            {"texture",
             {{"scale", s.texture.scale},
              {"octaves", s.texture.octaves},
              {"base", json::array({s.texture.base.r, s.texture.base.g, s.texture.base.b})},
              {"contrast", s.texture.contrast}}},
            {"object",
             {{"shape", shape_name(s.object.shape)},
              {"size", json::array({s.object.width, s.object.height})},
              {"start", point_json(s.object.start)},
              {"contrast_delta", s.object.contrast_delta},
              {"texture_offset", point_json(s.object.texture_offset)}}},
            {"object_steps", steps},
            {"camera", cams},
            {"distractors", distractors}};
}

SceneScript scene_from_json(const json& j, std::uint64_t* seed) {
    try {
        SceneScript s;
        s.name = j.at("name").get<std::string>();
        if (seed) *seed = j.at("seed").get<std::uint64_t>();
        s.width = j.at("width").get<int>();
        s.height = j.at("height").get<int>();
        s.frame_count = j.at("frame_count").get<int>();
        const json& tex = j.at("texture");
        s.texture.scale = tex.at("scale").get<double>();
        s.texture.octaves = tex.at("octaves").get<int>();
        s.texture.base = {tex.at("base").at(0).get<std::uint8_t>(), tex.at("base").at(1).get<std::uint8_t>(),
                          tex.at("base").at(2).get<std::uint8_t>()};
        s.texture.contrast = tex.at("contrast").get<double>();
        const json& obj = j.at("object");
        s.object.shape = parse_shape(obj.at("shape").get<std::string>());
        s.object.width = obj.at("size").at(0).get<double>();
        s.object.height = obj.at("size").at(1).get<double>();
        s.object.start = point_from(obj.at("start"));
        s.object.contrast_delta = obj.at("contrast_delta").get<double>();
        s.object.texture_offset = point_from(obj.at("texture_offset"));
        for (const auto& p : j.at("object_steps")) s.object_steps.push_back(point_from(p));
        for (const auto& c : j.at("camera")) {
            AffineTransform a;
            a.a = c.at(0).get<double>();
            a.b = c.at(1).get<double>();
            a.tx = c.at(2).get<double>();
            a.c = c.at(3).get<double>();
            a.d = c.at(4).get<double>();
            a.ty = c.at(5).get<double>();
            s.camera.push_back(a);
        }
        for (const auto& dj : j.at("distractors")) {
            Distractor d;
            d.shape = parse_shape(dj.at("shape").get<std::string>());
            d.width = dj.at("size").at(0).get<double>();
            d.height = dj.at("size").at(1).get<double>();
            d.center = point_from(dj.at("center"));
            d.contrast_delta = dj.at("contrast_delta").get<double>();
            d.texture_offset = point_from(dj.at("texture_offset"));
            s.distractors.push_back(d);
        }
        s.validate();
        return s;
    } catch (const json::exception& e) {
        throw FormatError(std::string("invalid scene description: ") + e.what());
    }
}

// ---------------------------------------------------------------- fixtures

std::vector<SceneScript> standard_scripts(int count, int width, int height, int frames) {
    std::vector<SceneScript> out;
    for (int i = 0; i < count; ++i) {
        const bool panning = i % 2 == 1;
        const double angle = 2.0 * std::numbers::pi * ((i * 3) % 8) / 8.0 + 0.3;
        const double speed = 1.2 + 0.2 * (i % 5);
        const Point2 rel{speed * std::cos(angle), speed * std::sin(angle)};
        const Point2 cam = panning ? Point2{1.5 + 0.5 * (i % 3), (i % 4 == 1) ? 0.5 : -0.25} : Point2{0, 0};

        SceneScript s = make_linear_scene(width, height, frames, {rel.x + cam.x, rel.y + cam.y}, cam);
        s.name = "synth_" + std::string(i < 10 ? "0" : "") + std::to_string(i);
        s.object.shape = i % 3 == 2 ? Shape::Rectangle : Shape::Ellipse;
        s.object.width = 0.16 * width + 2.0 * (i % 4);
        s.object.height = 0.13 * height + 1.5 * ((i + 1) % 3);
        s.object.contrast_delta = (i % 2 == 0) ? 4.0 : -3.0;
        s.object.texture_offset = {31.0 + 7 * i, 57.0 + 3 * i};
        // Center the trajectory on the canvas.
        const double span = frames - 1;
        s.object.start = {width / 2.0 - rel.x * span / 2, height / 2.0 - rel.y * span / 2};

        // A brief pause in some clips, which is where accumulated flow matters.
        if (i % 4 == 3) {
            for (int t = frames / 3; t < frames / 3 + 4 && t < frames; ++t) {
                s.object_steps[static_cast<std::size_t>(t)] = cam;
                s.object.start.x += rel.x / 2;
                s.object.start.y += rel.y / 2;
            }
        }
        if (i % 3 == 0) {
            Distractor d;
            d.center = {0.2 * width, 0.8 * height};
            d.texture_offset = {71.0 + i, 19.0 + 2 * i};
            s.distractors.push_back(d);
        }
        out.push_back(std::move(s));
    }
    return out;
}

void write_synthetic_dataset(const fs::path& root, const std::vector<SceneScript>& scripts, std::uint64_t seed,
                             const SynthOptions& options) {
    if (options.gt_stride < 1) throw InvalidArgument("gt stride must be >= 1");
    for (std::size_t i = 0; i < scripts.size(); ++i) {
        const SceneScript& s = scripts[i];
        const std::uint64_t video_seed = seed + i;
        const SyntheticVideo sv = generate(s, video_seed);
        const fs::path dir = root / s.name;
        fs::create_directories(dir / options.layout.images_dir);
        fs::create_directories(dir / options.layout.gt_dir);
        for (const auto& f : sv.video.frames())
            write_png(f, dir / options.layout.images_dir / frame_filename(f.index()));
        std::map<int, BoundingBox> boxes;
        for (const auto& [t, mask] : sv.gt.masks) {
            if (t % options.gt_stride != 0) continue;
            write_png(mask, dir / options.layout.gt_dir / frame_filename(t));
            if (auto it = sv.gt.boxes.find(t); it != sv.gt.boxes.end()) boxes.emplace(t, it->second);
        }
        save_boxes_csv(boxes, dir / options.layout.boxes_file);
        if (options.write_flow) {
            fs::create_directories(dir / kFlowDir);
            for (std::size_t t = 0; t < sv.flows.size(); ++t)
                write_flow_file(sv.flows[t], dir / kFlowDir / frame_filename(static_cast<int>(t), ".flo"));
        }
        const std::string text = scene_to_json(s, video_seed).dump(1);
        write_file_bytes(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()), dir / kSceneFile);
    }
}

}  // namespace vcos
