#include "vcos/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "vcos/errors.hpp"

#ifndef VCOS_VERSION
#define VCOS_VERSION "0.1.0"
#endif
#ifndef VCOS_PRESETS_DIR
#define VCOS_PRESETS_DIR "presets"
#endif

namespace vcos {

namespace {

const std::map<std::string, std::string>& defaults() {
    static const std::map<std::string, std::string> d = {
        {"camera.theta_cam_frac", "0.02"},
        {"camera.max_points", "100"},
        {"camera.min_distance", "5"},
        {"camera.ransac_iterations", "200"},
        {"camera.inlier_threshold", "2"},
        {"camera.ransac_seed", "1234"},
        {"cues.motion", "auto"},
        {"cues.mean_subtract", "true"},
        {"cues.use_momentum", "true"},
        {"cues.momentum", "0.9"},
        {"cues.highlight_color", "blue"},
        {"cues.normalize", "frame"},
        {"bgs.k", "5"},
        {"bgs.alpha", "0.01"},
        {"bgs.var_floor", "4"},
        {"bgs.var_init", "15"},
        {"detect.threshold", "0.05"},
        {"detect.sweep", "0.03,0.05,0.07,0.09,0.11,0.13"},
        {"detect.prompt_variant", "full"},
        {"detect.positive", ""},
        {"detect.negatives", "default"},
        {"track.mode", "bidirectional"},
        {"track.prompt_mode", "box_point"},
        {"track.merge", "or"},
        {"eval.agg_mode", "frame_then_video"},
        {"eval.omit_last_frame", "false"},
        {"eval.bin_threshold", "0.5"},
        {"eval.dsr_tau", "0.5"},
        {"data.images_dir", "Imgs"},
        {"data.gt_dir", "GT"},
        {"data.boxes_file", "boxes.csv"},
        {"data.gt_stride", "5"},
        {"providers.flow", "mock:pattern"},
        {"providers.detector", "mock:highlight"},
        {"providers.segmenter", "mock:box"},
        {"providers.timeout", "30"},
        {"providers.max_retries", "3"},
        {"providers.backoff", "0.5"},
        {"oracle.miss_rate", "0"},
        {"oracle.jitter", "0"},
        {"oracle.score", "0.5"},
        {"oracle.drift", "0"},
        {"oracle.flow_noise", "0"},
        {"oracle.seed", "7"},
        {"oracle.min_highlight", "8"},
        {"oracle.distractor_score", "0.3"},
        {"oracle.fire_frames", ""},
        {"run.workers", "1"},
    };
    return d;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0;
    const auto s = trim(v);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    return out;
}

long to_long(const std::string& key, const std::string& v) {
    long out = 0;
    const auto s = trim(v);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        throw ConfigError(key + ": expected an integer, got '" + v + "'");
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    std::string s = trim(v);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------- store

ConfigStore::ConfigStore() : values_(defaults()) {}

bool ConfigStore::known(const std::string& key) { return defaults().count(key) > 0; }

std::vector<std::string> ConfigStore::keys() {
    std::vector<std::string> out;
    for (const auto& [k, _] : defaults()) out.push_back(k);
    return out;
}

const std::string& ConfigStore::default_value(const std::string& key) {
    const auto it = defaults().find(key);
    if (it == defaults().end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
}

void ConfigStore::set(const std::string& key, const std::string& value) {
    if (!known(key)) throw ConfigError("unknown config key '" + key + "'");
    values_[key] = value;
    explicit_[key] = true;
}

const std::string& ConfigStore::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
}

void ConfigStore::merge_text(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        try {
            set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

void ConfigStore::merge_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    merge_text(ss.str(), path.string());
}

void ConfigStore::merge_assignment(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::string env_var_name(const std::string& key) {
    std::string out = "VCOS_";
    for (char c : key) out += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

void ConfigStore::merge_environment() {
    for (const auto& key : keys())
        if (const char* v = std::getenv(env_var_name(key).c_str())) set(key, v);
}

// ---------------------------------------------------------------- typed config

const char* to_string(CueMode m) {
    switch (m) {
        case CueMode::Auto: return "auto";
        case CueMode::Flow: return "flow";
        case CueMode::Bgs: return "bgs";
        case CueMode::None: return "none";
    }
    return "?";
}

const char* to_string(TrackMode m) {
    switch (m) {
        case TrackMode::None: return "none";
        case TrackMode::Forward: return "forward";
        case TrackMode::Bidirectional: return "bidirectional";
    }
    return "?";
}

Rgb parse_color(const std::string& raw) {
    const std::string s = trim(raw);
    static const std::map<std::string, Rgb> named = {
        {"blue", {0, 0, 255}},    {"red", {255, 0, 0}},       {"green", {0, 255, 0}},
        {"yellow", {255, 255, 0}}, {"magenta", {255, 0, 255}}, {"cyan", {0, 255, 255}},
    };
    if (const auto it = named.find(s); it != named.end()) return it->second;
    auto channel = [&](long v) {
        if (v < 0 || v > 255) throw ConfigError("color channel out of range in '" + raw + "'");
        return static_cast<std::uint8_t>(v);
    };
    if (s.size() == 7 && s[0] == '#') {
        long v = 0;
        const auto [ptr, ec] = std::from_chars(s.data() + 1, s.data() + 7, v, 16);
        if (ec != std::errc() || ptr != s.data() + 7) throw ConfigError("invalid color '" + raw + "'");
        return {channel((v >> 16) & 255), channel((v >> 8) & 255), channel(v & 255)};
    }
    const auto parts = split_list(s);
    if (parts.size() == 3)
        return {channel(to_long("color", parts[0])), channel(to_long("color", parts[1])),
                channel(to_long("color", parts[2]))};
    throw ConfigError("invalid color '" + raw + "'");
}

std::vector<double> parse_number_list(const std::string& s) {
    std::vector<double> out;
    for (const auto& item : split_list(s)) out.push_back(to_double("list", item));
    return out;
}

PipelineConfig build_config(const ConfigStore& store) {
    PipelineConfig c;
    c.store = store;
    auto num = [&](const char* k) { return to_double(k, store.get(k)); };
    auto integer = [&](const char* k) { return to_long(k, store.get(k)); };
    auto flag = [&](const char* k) { return to_bool(k, store.get(k)); };
    auto text = [&](const char* k) { return trim(store.get(k)); };

    c.camera.theta_cam_frac = num("camera.theta_cam_frac");
    if (!(c.camera.theta_cam_frac > 0)) throw ConfigError("camera.theta_cam_frac must be > 0");
    c.camera.features.max_points = static_cast<int>(integer("camera.max_points"));
    c.camera.features.min_distance = num("camera.min_distance");
    if (c.camera.features.max_points < 3) throw ConfigError("camera.max_points must be >= 3");
    c.camera.ransac.iterations = static_cast<int>(integer("camera.ransac_iterations"));
    if (c.camera.ransac.iterations < 100) throw ConfigError("camera.ransac_iterations must be >= 100");
    c.camera.ransac.inlier_threshold = num("camera.inlier_threshold");
    c.camera.ransac.seed = static_cast<std::uint64_t>(integer("camera.ransac_seed"));

    const std::string motion = text("cues.motion");
    if (motion == "auto") c.cue_mode = CueMode::Auto;
    else if (motion == "flow") c.cue_mode = CueMode::Flow;
    else if (motion == "bgs") c.cue_mode = CueMode::Bgs;
    else if (motion == "none") c.cue_mode = CueMode::None;
    else throw ConfigError("cues.motion must be auto, flow, bgs or none");
    c.mean_subtract = flag("cues.mean_subtract");
    c.use_momentum = flag("cues.use_momentum");
    c.momentum = num("cues.momentum");
    if (!(c.momentum >= 0 && c.momentum < 1)) throw ConfigError("cues.momentum must be in [0, 1)");
    c.highlight_color = parse_color(text("cues.highlight_color"));
    const std::string norm = text("cues.normalize");
    if (norm == "frame") c.normalize = Normalization::PerFrame;
    else if (norm == "video") c.normalize = Normalization::PerVideo;
    else throw ConfigError("cues.normalize must be frame or video");

    c.bgs.k = static_cast<int>(integer("bgs.k"));
    c.bgs.alpha = num("bgs.alpha");
    c.bgs.var_floor = num("bgs.var_floor");
    c.bgs.var_init = num("bgs.var_init");
    if (c.bgs.k < 1) throw ConfigError("bgs.k must be >= 1");
    if (!(c.bgs.alpha > 0 && c.bgs.alpha < 1)) throw ConfigError("bgs.alpha must be in (0, 1)");
    if (!(c.bgs.var_floor > 0) || c.bgs.var_init < c.bgs.var_floor)
        throw ConfigError("bgs.var_floor must be > 0 and bgs.var_init >= bgs.var_floor");

    c.threshold = num("detect.threshold");
    if (!(c.threshold > 0 && c.threshold < 1)) throw ConfigError("detect.threshold must be in (0, 1)");
    c.sweep = parse_number_list(store.get("detect.sweep"));
    for (double t : c.sweep)
        if (!(t > 0 && t < 1)) throw ConfigError("detect.sweep values must be in (0, 1)");
    try {
        c.prompts.variant = parse_prompt_variant(text("detect.prompt_variant"));
    } catch (const Error& e) {
        throw ConfigError(std::string("detect.prompt_variant: ") + e.what());
    }
    const std::string color = text("cues.highlight_color");
    if (color.find_first_of(",#") == std::string::npos) c.prompts.color_name = color;
    c.prompts.positive_override = text("detect.positive");
    const std::string negatives = text("detect.negatives");
    if (negatives == "none") c.prompts.negatives_override = std::vector<std::string>{};
    else if (negatives != "default") c.prompts.negatives_override = split_list(negatives);

    const std::string track = text("track.mode");
    if (track == "none") c.track_mode = TrackMode::None;
    else if (track == "forward") c.track_mode = TrackMode::Forward;
    else if (track == "bidirectional") c.track_mode = TrackMode::Bidirectional;
    else throw ConfigError("track.mode must be none, forward or bidirectional");
    try {
        c.prompt_mode = parse_prompt_mode(text("track.prompt_mode"));
    } catch (const Error& e) {
        throw ConfigError(std::string("track.prompt_mode: ") + e.what());
    }
    if (text("track.merge") != "or") throw ConfigError("track.merge must be 'or'");
    if (c.track_mode != TrackMode::Bidirectional && store.explicitly_set("track.merge"))
        throw ConfigError("track.merge only applies to bidirectional tracking");

    try {
        c.eval.mode = parse_aggregation_mode(text("eval.agg_mode"));
    } catch (const Error& e) {
        throw ConfigError(std::string("eval.agg_mode: ") + e.what());
    }
    c.eval.omit_last_frame = flag("eval.omit_last_frame");
    c.eval.binarize_threshold = num("eval.bin_threshold");
    c.eval.dsr_tau = num("eval.dsr_tau");
    if (!(c.eval.binarize_threshold > 0 && c.eval.binarize_threshold <= 1))
        throw ConfigError("eval.bin_threshold must be in (0, 1]");
    if (!(c.eval.dsr_tau > 0 && c.eval.dsr_tau <= 1)) throw ConfigError("eval.dsr_tau must be in (0, 1]");

    c.layout.images_dir = text("data.images_dir");
    c.layout.gt_dir = text("data.gt_dir");
    c.layout.boxes_file = text("data.boxes_file");
    c.gt_stride = static_cast<int>(integer("data.gt_stride"));
    if (c.gt_stride < 1) throw ConfigError("data.gt_stride must be >= 1");

    c.providers.flow = text("providers.flow");
    c.providers.detector = text("providers.detector");
    c.providers.segmenter = text("providers.segmenter");
    c.providers.timeout_s = num("providers.timeout");
    c.providers.max_retries = static_cast<int>(integer("providers.max_retries"));
    c.providers.backoff_s = num("providers.backoff");
    if (!(c.providers.timeout_s > 0)) throw ConfigError("providers.timeout must be > 0");
    if (c.providers.max_retries < 0) throw ConfigError("providers.max_retries must be >= 0");
    if (c.providers.backoff_s < 0) throw ConfigError("providers.backoff must be >= 0");

    c.oracle.miss_rate = num("oracle.miss_rate");
    c.oracle.jitter = num("oracle.jitter");
    c.oracle.score = num("oracle.score");
    c.oracle.drift = num("oracle.drift");
    c.oracle.flow_noise = num("oracle.flow_noise");
    c.oracle.seed = static_cast<std::uint64_t>(integer("oracle.seed"));
    c.oracle.min_highlight = num("oracle.min_highlight");
    c.oracle.distractor_score = num("oracle.distractor_score");
    if (const std::string ff = text("oracle.fire_frames"); !ff.empty()) {
        std::vector<int> frames;
        for (const auto& item : split_list(ff)) frames.push_back(static_cast<int>(to_long("oracle.fire_frames", item)));
        c.oracle.fire_frames = frames;
    }
    c.oracle.validate();

    c.workers = static_cast<int>(integer("run.workers"));
    if (c.workers < 1) throw ConfigError("run.workers must be >= 1");
    return c;
}

// ---------------------------------------------------------------- presets

fs::path presets_dir() {
    if (const char* env = std::getenv("VCOS_PRESETS_DIR")) return env;
    return VCOS_PRESETS_DIR;
}

std::vector<PresetInfo> list_presets(const fs::path& dir) {
    std::vector<PresetInfo> out;
    if (!fs::is_directory(dir)) throw ConfigError("presets directory not found: " + dir.string());
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".cfg") continue;
        PresetInfo info{entry.path().stem().string(), "", entry.path()};
        std::ifstream in(entry.path());
        std::string line;
        while (std::getline(in, line)) {
            line = trim(line);
            if (line.rfind('#', 0) == 0) {
                info.description = trim(line.substr(1));
                break;
            }
        }
        out.push_back(std::move(info));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
    return out;
}

fs::path preset_path(const std::string& name, const fs::path& dir) {
    const fs::path p = dir / (name + ".cfg");
    if (!fs::is_regular_file(p)) throw ConfigError("unknown preset '" + name + "' (looked in " + dir.string() + ")");
    return p;
}

PipelineConfig load_config(const std::vector<std::string>& presets, const std::optional<fs::path>& config_file,
                           const std::vector<std::string>& assignments, bool use_environment) {
    ConfigStore store;
    for (const auto& p : presets) store.merge_file(preset_path(p));
    if (config_file) store.merge_file(*config_file);
    if (use_environment) store.merge_environment();
    for (const auto& a : assignments) store.merge_assignment(a);
    return build_config(store);
}

std::string version_string() { return VCOS_VERSION; }

}  // namespace vcos
