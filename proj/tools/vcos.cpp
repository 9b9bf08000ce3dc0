// Command-line front end: run, bench, eval, synth, presets, serve-mock, conformance.

#include <csignal>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vcos/config.hpp"
#include "vcos/errors.hpp"
#include "vcos/mock_providers.hpp"
#include "vcos/pipeline.hpp"
#include "vcos/protocol.hpp"
#include "vcos/provider_server.hpp"
#include "vcos/synthetic.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitVideoFailures = 2;

struct ConfigArgs {
    std::vector<std::string> presets;
    std::string config_file;
    std::vector<std::string> sets;

    void attach(CLI::App* app) {
        app->add_option("-p,--preset", presets, "Preset name from the presets directory (repeatable, applied in order)");
        app->add_option("-c,--config", config_file, "Config file with 'key = value' lines")->check(CLI::ExistingFile);
        app->add_option("-s,--set", sets, "Override, key=value (repeatable)");
    }

    vcos::PipelineConfig load() const {
        return vcos::load_config(presets, config_file.empty() ? std::nullopt : std::optional<vcos::fs::path>(config_file),
                                 sets);
    }
};

vcos::ProviderServer* g_server = nullptr;

void handle_signal(int) {
    if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Zero-shot video camouflaged object segmentation"};
    app.set_version_flag("--version", vcos::version_string());
    app.require_subcommand(1);

    // run
    ConfigArgs run_cfg;
    std::string run_video_dir, run_out;
    auto* run = app.add_subcommand("run", "Segment one video at detect.threshold");
    run_cfg.attach(run);
    run->add_option("video", run_video_dir, "Video directory (frames, or an Imgs/ subdirectory)")->required();
    run->add_option("-o,--out", run_out, "Output directory for masks")->required();

    // bench
    ConfigArgs bench_cfg;
    std::string bench_data, bench_out;
    bool bench_save_masks = false;
    auto* bench = app.add_subcommand("bench", "Run a dataset over the detect.sweep thresholds and write reports");
    bench_cfg.attach(bench);
    bench->add_option("dataset", bench_data, "Dataset root with one directory per video")->required();
    bench->add_option("-o,--out", bench_out, "Report directory")->required();
    bench->add_flag("--save-masks", bench_save_masks, "Also write masks at the best mIoU threshold");

    // eval
    ConfigArgs eval_cfg;
    std::string eval_pred, eval_data, eval_out;
    auto* eval = app.add_subcommand("eval", "Score an existing prediction directory");
    eval_cfg.attach(eval);
    eval->add_option("predictions", eval_pred, "Prediction root: <video>/<frame>.png")->required();
    eval->add_option("dataset", eval_data, "Dataset root with ground truth")->required();
    eval->add_option("-o,--out", eval_out, "Report directory");

    // synth
    std::string synth_out;
    int synth_videos = 10, synth_frames = 30, synth_size = 128, synth_stride = 5;
    std::uint64_t synth_seed = 1;
    bool synth_no_flow = false;
    auto* synth = app.add_subcommand("synth", "Write a synthetic dataset in the MoCA-Mask layout");
    synth->add_option("out", synth_out, "Dataset root to create")->required();
    synth->add_option("--videos", synth_videos, "Number of videos")->check(CLI::PositiveNumber);
    synth->add_option("--frames", synth_frames, "Frames per video")->check(CLI::Range(2, 100000));
    synth->add_option("--size", synth_size, "Frame width and height")->check(CLI::Range(64, 4096));
    synth->add_option("--seed", synth_seed, "Texture seed");
    synth->add_option("--gt-stride", synth_stride, "Ground truth every N frames")->check(CLI::PositiveNumber);
    synth->add_flag("--no-flow", synth_no_flow, "Skip writing exact flow files");

    // presets
    auto* presets = app.add_subcommand("presets", "Inspect shipped presets");
    presets->require_subcommand(1);
    auto* presets_list = presets->add_subcommand("list", "List presets");

    // serve-mock
    std::string serve_host = "127.0.0.1";
    int serve_port = 8765;
    auto* serve = app.add_subcommand("serve-mock", "Serve the generic mock providers over HTTP");
    serve->add_option("--host", serve_host, "Bind address");
    serve->add_option("--port", serve_port, "Port")->check(CLI::Range(1, 65535));

    // conformance
    std::string conf_url;
    double conf_timeout = 10;
    auto* conformance = app.add_subcommand("conformance", "Replay the golden request suite against a provider server");
    conformance->add_option("url", conf_url, "Base URL, e.g. http://127.0.0.1:8765")->required();
    conformance->add_option("--timeout", conf_timeout, "Per-request timeout in seconds");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            const auto config = run_cfg.load();
            const vcos::ProviderFactory factory(config);
            const auto outcome = vcos::process_video(config, run_video_dir, factory.for_video(run_video_dir),
                                                     {config.threshold});
            if (outcome.error) {
                std::cerr << outcome.video << ": " << *outcome.error << "\n";
                return kExitVideoFailures;
            }
            const auto& masks = outcome.masks.begin()->second;
            vcos::save_mask_series(masks, run_out);
            std::cout << outcome.video << ": route " << outcome.route << ", "
                      << outcome.detected_frames.begin()->second << " frames with detections, " << masks.masks.size()
                      << " masks written to " << run_out << "\n";
            return kExitOk;
        }
        if (*bench) {
            const auto config = bench_cfg.load();
            const auto record = vcos::run_sweep(config, bench_data,
                                                bench_save_masks ? std::optional<vcos::fs::path>(vcos::fs::path(bench_out) / "masks")
                                                                 : std::nullopt);
            vcos::emit_report(record, bench_out);
            int failed = 0;
            for (const auto& v : record.videos)
                if (v.error) {
                    ++failed;
                    std::cerr << "failed: " << v.video << ": " << *v.error << "\n";
                }
            for (const auto& b : record.best)
                if (b.metric == vcos::Metric::IoU)
                    std::cout << "mIoU " << b.value << " at threshold " << vcos::format_threshold(b.threshold)
                              << " (per-video best " << b.per_video_value << ")\n";
            std::cout << record.videos.size() << " videos, " << failed << " failed; reports in " << bench_out << "\n";
            return failed ? kExitVideoFailures : kExitOk;
        }
        if (*eval) {
            const auto config = eval_cfg.load();
            const auto report = vcos::evaluate_predictions(eval_pred, eval_data, config);
            if (!eval_out.empty()) vcos::emit_eval_report(report, eval_out);
            for (vcos::Metric m : vcos::kAllMetrics) {
                const auto v = report.headline(m);
                std::cout << vcos::to_string(m) << " " << (v ? std::to_string(*v) : std::string("n/a")) << "\n";
            }
            for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
            return kExitOk;
        }
        if (*synth) {
            vcos::SynthOptions options;
            options.gt_stride = synth_stride;
            options.write_flow = !synth_no_flow;
            const auto scripts = vcos::standard_scripts(synth_videos, synth_size, synth_size, synth_frames);
            vcos::write_synthetic_dataset(synth_out, scripts, synth_seed, options);
            std::cout << "wrote " << scripts.size() << " videos to " << synth_out << "\n";
            return kExitOk;
        }
        if (*presets_list) {
            for (const auto& p : vcos::list_presets()) std::cout << p.name << "\t" << p.description << "\n";
            return kExitOk;
        }
        if (*serve) {
            vcos::protocol::ServerCapabilities caps;
            caps.model_name = "vcos-mock";
            caps.flow_model = "mock-pattern-flow";
            caps.detector_model = "mock-highlight-detector";
            caps.segmenter_model = "mock-box-segmenter";
            vcos::ProviderServer server(vcos::make_generic_mocks(), caps);
            g_server = &server;
            std::signal(SIGINT, handle_signal);
            std::signal(SIGTERM, handle_signal);
            std::cout << "serving mock providers on http://" << serve_host << ":" << serve_port << std::endl;
            server.listen_blocking(serve_host, serve_port);
            g_server = nullptr;
            return kExitOk;
        }
        if (*conformance) {
            const auto report = vcos::protocol::conformance_check(conf_url, conf_timeout);
            for (const auto& r : report.results)
                std::cout << (r.passed ? "PASS " : "FAIL ") << r.endpoint << ": " << r.message << "\n";
            return report.all_passed() ? kExitOk : kExitVideoFailures;
        }
    } catch (const vcos::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitFatal;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFatal;
    }
    return kExitOk;
}
