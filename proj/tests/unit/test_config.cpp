#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "test_support.hpp"
#include "vcos/config.hpp"
#include "vcos/errors.hpp"

using namespace vcos;

namespace {

struct EnvGuard {
    std::string name;
    EnvGuard(std::string n, const char* value) : name(std::move(n)) { ::setenv(name.c_str(), value, 1); }
    ~EnvGuard() { ::unsetenv(name.c_str()); }
};

}  // namespace

TEST_CASE("defaults build and match the documented values") {
    const PipelineConfig c = build_config(ConfigStore{});
    CHECK(c.camera.theta_cam_frac == 0.02);
    CHECK(c.cue_mode == CueMode::Auto);
    CHECK(c.mean_subtract);
    CHECK(c.use_momentum);
    CHECK(c.momentum == 0.9);
    CHECK(c.highlight_color == Rgb{0, 0, 255});
    CHECK(c.threshold == 0.05);
    CHECK(c.sweep == std::vector<double>{0.03, 0.05, 0.07, 0.09, 0.11, 0.13});
    CHECK(c.track_mode == TrackMode::Bidirectional);
    CHECK(c.prompt_mode == PromptMode::BoxPlusPoint);
    CHECK(c.eval.mode == AggregationMode::FrameThenVideo);
    CHECK_FALSE(c.eval.omit_last_frame);
    CHECK(c.gt_stride == 5);
    CHECK(c.workers == 1);
}

TEST_CASE("unknown keys and bad values are config errors") {
    ConfigStore s;
    CHECK_THROWS_AS(s.set("no.such.key", "1"), ConfigError);
    CHECK_THROWS_AS(s.get("no.such.key"), ConfigError);
    CHECK_THROWS_AS(s.merge_assignment("detect.threshold"), ConfigError);
    CHECK_THROWS_AS(s.merge_text("detect.threshold 0.1\n", "x"), ConfigError);

    auto bad = [](const std::string& key, const std::string& value) {
        ConfigStore st;
        st.set(key, value);
        CHECK_THROWS_AS(build_config(st), ConfigError);
    };
    bad("detect.threshold", "0");
    bad("detect.threshold", "1");
    bad("detect.threshold", "abc");
    bad("detect.sweep", "0.1,1.5");
    bad("cues.momentum", "1");
    bad("cues.motion", "sideways");
    bad("track.mode", "both");
    bad("bgs.alpha", "0");
    bad("camera.ransac_iterations", "50");
    bad("cues.mean_subtract", "maybe");
    bad("eval.agg_mode", "weird");
    bad("run.workers", "0");
}

TEST_CASE("merge only pairs with bidirectional tracking") {
    ConfigStore s;
    s.set("track.mode", "forward");
    CHECK_NOTHROW(build_config(s));
    s.set("track.merge", "or");
    CHECK_THROWS_AS(build_config(s), ConfigError);
    ConfigStore b;
    b.set("track.merge", "or");
    CHECK_NOTHROW(build_config(b));
    b.set("track.merge", "and");
    CHECK_THROWS_AS(build_config(b), ConfigError);
}

TEST_CASE("config text parsing") {
    ConfigStore s;
    s.merge_text("# comment\n\n  detect.threshold = 0.09  # trailing\ncues.motion=flow\n", "inline");
    CHECK(s.get("detect.threshold") == "0.09");
    CHECK(s.get("cues.motion") == "flow");
    CHECK(s.explicitly_set("cues.motion"));
    CHECK_FALSE(s.explicitly_set("track.mode"));
}

TEST_CASE("layer precedence") {
    vcos::testing::TempDir dir("cfg");
    {
        std::ofstream(dir / "run.cfg") << "detect.threshold = 0.07\ncues.momentum = 0.5\ntrack.mode = forward\n";
    }
    SUBCASE("preset then file") {
        const auto c = load_config({"moca_filtered"}, dir / "run.cfg", {}, false);
        CHECK(c.threshold == 0.07);
        CHECK(c.momentum == 0.5);
        CHECK(c.sweep == std::vector<double>{0.12});
    }
    SUBCASE("environment over file") {
        EnvGuard g(env_var_name("detect.threshold"), "0.11");
        CHECK(load_config({}, dir / "run.cfg", {}, true).threshold == 0.11);
        CHECK(load_config({}, dir / "run.cfg", {}, false).threshold == 0.07);
    }
    SUBCASE("assignments over environment") {
        EnvGuard g(env_var_name("detect.threshold"), "0.11");
        CHECK(load_config({}, dir / "run.cfg", {"detect.threshold=0.13"}, true).threshold == 0.13);
    }
    SUBCASE("later presets win") {
        CHECK(load_config({"a", "ours"}, std::nullopt, {}, false).track_mode == TrackMode::Bidirectional);
        CHECK(load_config({"ours", "a"}, std::nullopt, {}, false).track_mode == TrackMode::None);
    }
    CHECK_THROWS_AS(load_config({}, dir / "missing.cfg", {}, false), ConfigError);
    CHECK_THROWS_AS(load_config({"no_such_preset"}, std::nullopt, {}, false), ConfigError);
}

TEST_CASE("environment variable names") {
    CHECK(env_var_name("detect.threshold") == "VCOS_DETECT_THRESHOLD");
    CHECK(env_var_name("eval.omit_last_frame") == "VCOS_EVAL_OMIT_LAST_FRAME");
    EnvGuard g("VCOS_TRACK_MODE", "none");
    ConfigStore s;
    s.merge_environment();
    CHECK(s.get("track.mode") == "none");
}

TEST_CASE("every preset builds") {
    const auto presets = list_presets();
    REQUIRE(presets.size() >= 12);
    for (const auto& p : presets) {
        CAPTURE(p.name);
        CHECK_FALSE(p.description.empty());
        CHECK_NOTHROW(load_config({p.name}, std::nullopt, {}, false));
    }
    CHECK(load_config({"moca_filtered"}, std::nullopt, {}, false).threshold == 0.12);
}

TEST_CASE("ablation presets encode their rows") {
    struct Row {
        const char* name;
        CueMode cue;
        bool mean;
        bool momentum;
        TrackMode track;
    };
    const Row rows[] = {
        {"a", CueMode::None, false, false, TrackMode::None},
        {"b", CueMode::None, false, false, TrackMode::Bidirectional},
        {"c", CueMode::Flow, true, false, TrackMode::Bidirectional},
        {"d", CueMode::Flow, true, true, TrackMode::Bidirectional},
        {"e", CueMode::Auto, true, false, TrackMode::Bidirectional},
        {"f", CueMode::Auto, true, false, TrackMode::None},
        {"g", CueMode::Auto, true, true, TrackMode::None},
        {"h", CueMode::Auto, true, true, TrackMode::Forward},
        {"i", CueMode::Auto, false, true, TrackMode::Bidirectional},
        {"ours", CueMode::Auto, true, true, TrackMode::Bidirectional},
    };
    for (const auto& r : rows) {
        CAPTURE(r.name);
        const auto c = load_config({r.name}, std::nullopt, {}, false);
        CHECK(c.cue_mode == r.cue);
        CHECK(c.mean_subtract == r.mean);
        CHECK(c.use_momentum == r.momentum);
        CHECK(c.track_mode == r.track);
    }
}

TEST_CASE("presets directory override") {
    vcos::testing::TempDir dir("presets");
    {
        std::ofstream(dir / "mine.cfg") << "# Mine\ndetect.threshold = 0.33\n";
    }
    EnvGuard g("VCOS_PRESETS_DIR", dir.path().c_str());
    CHECK(presets_dir() == dir.path());
    const auto ps = list_presets();
    REQUIRE(ps.size() == 1);
    CHECK(ps[0].name == "mine");
    CHECK(ps[0].description == "Mine");
    CHECK(load_config({"mine"}, std::nullopt, {}, false).threshold == 0.33);
}

TEST_CASE("color and list parsing") {
    CHECK(parse_color("blue") == Rgb{0, 0, 255});
    CHECK(parse_color(" red ") == Rgb{255, 0, 0});
    CHECK(parse_color("10,20,30") == Rgb{10, 20, 30});
    CHECK(parse_color("#0a141e") == Rgb{10, 20, 30});
    CHECK_THROWS_AS(parse_color("256,0,0"), ConfigError);
    CHECK_THROWS_AS(parse_color("#12"), ConfigError);
    CHECK_THROWS_AS(parse_color("ultraviolet"), ConfigError);
    CHECK(parse_number_list("0.1, 0.2,0.3") == std::vector<double>{0.1, 0.2, 0.3});
    CHECK_THROWS_AS(parse_number_list("0.1,x"), ConfigError);
}

TEST_CASE("version string") { CHECK_FALSE(version_string().empty()); }
