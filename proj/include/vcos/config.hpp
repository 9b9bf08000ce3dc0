#pragma once

// Pipeline configuration: a flat set of dotted keys with defaults, layered as
//   defaults < preset file < config file < VCOS_* environment < --set overrides.
// Files hold "key = value" lines; '#' starts a comment.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vcos/camera_motion.hpp"
#include "vcos/detection.hpp"
#include "vcos/metrics.hpp"
#include "vcos/mock_providers.hpp"
#include "vcos/motion_cues.hpp"
#include "vcos/tracking.hpp"
#include "vcos/video_model.hpp"

namespace vcos {

class ConfigStore {
public:
    ConfigStore();  // every known key at its default

    static bool known(const std::string& key);
    static std::vector<std::string> keys();
    static const std::string& default_value(const std::string& key);

    // Throws ConfigError for unknown keys.
    void set(const std::string& key, const std::string& value);
    const std::string& get(const std::string& key) const;
    bool explicitly_set(const std::string& key) const { return explicit_.count(key) > 0; }

    void merge_text(const std::string& text, const std::string& origin);
    void merge_file(const fs::path& path);
    // "key=value"
    void merge_assignment(const std::string& assignment);
    // VCOS_<KEY>, upper case with dots turned into underscores.
    void merge_environment();

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
    std::map<std::string, bool> explicit_;
};

std::string env_var_name(const std::string& key);

enum class CueMode { Auto, Flow, Bgs, None };
enum class Normalization { PerFrame, PerVideo };
enum class TrackMode { None, Forward, Bidirectional };

const char* to_string(CueMode m);
const char* to_string(TrackMode m);

struct ProvidersConfig {
    std::string flow;
    std::string detector;
    std::string segmenter;
    double timeout_s = 30;
    int max_retries = 3;
    double backoff_s = 0.5;
};

struct PipelineConfig {
    CameraMotionParams camera;

    CueMode cue_mode = CueMode::Auto;
    bool mean_subtract = true;
    bool use_momentum = true;
    double momentum = 0.9;
    Rgb highlight_color{0, 0, 255};
    Normalization normalize = Normalization::PerFrame;
    BgsParams bgs;

    double threshold = 0.05;
    std::vector<double> sweep;
    PromptConfig prompts;

    TrackMode track_mode = TrackMode::Bidirectional;
    PromptMode prompt_mode = PromptMode::BoxPlusPoint;

    EvalFlags eval;
    DatasetLayout layout;
    int gt_stride = 5;

    ProvidersConfig providers;
    OracleKnobs oracle;
    int workers = 1;

    ConfigStore store;  // source of truth for the snapshot
};

// Parses and validates every key. Throws ConfigError.
PipelineConfig build_config(const ConfigStore& store);

// Named colors or "r,g,b" / "#rrggbb".
Rgb parse_color(const std::string& s);
std::vector<double> parse_number_list(const std::string& s);

// Directory holding <name>.cfg presets; VCOS_PRESETS_DIR in the environment overrides the built-in path.
fs::path presets_dir();
struct PresetInfo {
    std::string name;
    std::string description;  // first comment line
    fs::path path;
};
std::vector<PresetInfo> list_presets(const fs::path& dir = presets_dir());
fs::path preset_path(const std::string& name, const fs::path& dir = presets_dir());

// Convenience for tools and tests: defaults, presets in order, config file, environment, then assignments.
PipelineConfig load_config(const std::vector<std::string>& presets, const std::optional<fs::path>& config_file,
                           const std::vector<std::string>& assignments, bool use_environment = true);

std::string version_string();

}  // namespace vcos
