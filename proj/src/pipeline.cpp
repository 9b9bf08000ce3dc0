#include "vcos/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "vcos/errors.hpp"
#include "vcos/http_providers.hpp"
#include "vcos/image_codec.hpp"
#include "vcos/mock_providers.hpp"

namespace vcos {

using nlohmann::json;

namespace {

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

bool is_http(const std::string& s) { return starts_with(s, "http://") || starts_with(s, "https://"); }

ProviderEndpoint endpoint_for(const ProvidersConfig& p, const std::string& url) {
    ProviderEndpoint e;
    e.base_url = url;
    e.timeout_s = p.timeout_s;
    e.max_retries = p.max_retries;
    e.backoff_s = p.backoff_s;
    return e;
}

// Wrappers that serialize calls for providers that declare no concurrency support.
class SerialFlow : public FlowProvider {
public:
    explicit SerialFlow(std::shared_ptr<FlowProvider> inner) : inner_(std::move(inner)) {}
    FlowField compute(const Frame& a, const Frame& b) override {
        std::lock_guard lock(mu_);
        return inner_->compute(a, b);
    }
    ProviderCapabilities capabilities() override { return inner_->capabilities(); }

private:
    std::shared_ptr<FlowProvider> inner_;
    std::mutex mu_;
};

class SerialDetector : public DetectorProvider {
public:
    explicit SerialDetector(std::shared_ptr<DetectorProvider> inner) : inner_(std::move(inner)) {}
    std::vector<Detection> detect(const Frame& image, const std::vector<std::string>& q, double t) override {
        std::lock_guard lock(mu_);
        return inner_->detect(image, q, t);
    }
    ProviderCapabilities capabilities() override { return inner_->capabilities(); }

private:
    std::shared_ptr<DetectorProvider> inner_;
    std::mutex mu_;
};

class SerialSegmenter : public SegmenterProvider {
public:
    explicit SerialSegmenter(std::shared_ptr<SegmenterProvider> inner) : inner_(std::move(inner)) {}
    std::string open_session(const VideoSequence& v) override {
        std::lock_guard lock(mu_);
        return inner_->open_session(v);
    }
    MaskSeries track(const std::string& s, const PromptTimeline& p, Direction d) override {
        std::lock_guard lock(mu_);
        return inner_->track(s, p, d);
    }
    void close_session(const std::string& s) override {
        std::lock_guard lock(mu_);
        inner_->close_session(s);
    }
    ProviderCapabilities capabilities() override { return inner_->capabilities(); }

private:
    std::shared_ptr<SegmenterProvider> inner_;
    std::mutex mu_;
};

template <typename Provider>
std::string probe(Provider& p, bool& concurrent) {
    try {
        const auto caps = p.capabilities();
        concurrent = caps.supports_concurrent;
        return caps.model_name;
    } catch (const ProviderError& e) {
        concurrent = false;
        return std::string("unreachable");
    }
}

std::string video_name(const fs::path& dir) {
    const fs::path clean = dir.filename().empty() ? dir.parent_path() : dir;
    return clean.filename().string();
}

bool has_images(const fs::path& dir) {
    if (!fs::is_directory(dir)) return false;
    for (const auto& e : fs::directory_iterator(dir)) {
        std::string ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (e.is_regular_file() && (ext == ".png" || ext == ".jpg" || ext == ".jpeg")) return true;
    }
    return false;
}

std::optional<BoundingBox> mask_extent(const BinaryMask& m) {
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
    return BoundingBox{double(x0), double(y0), double(x1 + 1), double(y1 + 1)};
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string fmt(const std::optional<double>& v, int digits = 3) {
    if (!v) return "-";
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << *v;
    return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

std::string format_threshold(double t) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, t);
    return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------- providers

ProviderFactory::ProviderFactory(const PipelineConfig& config) : config_(config) {
    const ProvidersConfig& p = config_.providers;

    if (is_http(p.flow)) {
        auto http = std::make_shared<HttpFlowProvider>(endpoint_for(p, p.flow));
        bool concurrent = false;
        names_["flow"] = probe(*http, concurrent);
        shared_.flow = concurrent ? std::shared_ptr<FlowProvider>(http) : std::make_shared<SerialFlow>(http);
    } else if (p.flow == "mock:pattern") {
        shared_.flow = std::make_shared<PatternFlowProvider>();
        names_["flow"] = shared_.flow->capabilities().model_name;
    } else if (p.flow == "mock:oracle") {
        names_["flow"] = "oracle-flow";
    } else if (starts_with(p.flow, "files:")) {
        if (p.flow.size() <= 6) throw ConfigError("providers.flow files: needs a subdirectory name");
        names_["flow"] = "flow-files";
    } else {
        throw ConfigError("providers.flow: unsupported provider '" + p.flow + "'");
    }

    if (is_http(p.detector)) {
        auto http = std::make_shared<HttpDetectorProvider>(endpoint_for(p, p.detector));
        bool concurrent = false;
        names_["detector"] = probe(*http, concurrent);
        shared_.detector =
            concurrent ? std::shared_ptr<DetectorProvider>(http) : std::make_shared<SerialDetector>(http);
    } else if (p.detector == "mock:highlight") {
        shared_.detector = std::make_shared<HighlightDetectorProvider>();
        names_["detector"] = shared_.detector->capabilities().model_name;
    } else if (p.detector == "mock:oracle") {
        names_["detector"] = "oracle-detector";
    } else {
        throw ConfigError("providers.detector: unsupported provider '" + p.detector + "'");
    }

    if (is_http(p.segmenter)) {
        auto http = std::make_shared<HttpSegmenterProvider>(endpoint_for(p, p.segmenter));
        bool concurrent = false;
        names_["segmenter"] = probe(*http, concurrent);
        shared_.segmenter =
            concurrent ? std::shared_ptr<SegmenterProvider>(http) : std::make_shared<SerialSegmenter>(http);
    } else if (p.segmenter == "mock:box") {
        shared_.segmenter = std::make_shared<BoxPropagationSegmenter>();
        names_["segmenter"] = shared_.segmenter->capabilities().model_name;
    } else if (p.segmenter == "mock:oracle") {
        names_["segmenter"] = "oracle-tracker";
    } else {
        throw ConfigError("providers.segmenter: unsupported provider '" + p.segmenter + "'");
    }
}

ProviderSet ProviderFactory::for_video(const fs::path& video_dir) const {
    ProviderSet set = shared_;
    const ProvidersConfig& p = config_.providers;
    std::shared_ptr<const OracleScene> scene;
    auto oracle_scene = [&] {
        if (!scene) scene = load_oracle_scene(video_dir);
        return scene;
    };
    if (p.flow == "mock:oracle") set.flow = std::make_shared<OracleFlowProvider>(oracle_scene(), config_.oracle);
    if (starts_with(p.flow, "files:")) set.flow = std::make_shared<FileFlowProvider>(video_dir / p.flow.substr(6));
    if (p.detector == "mock:oracle")
        set.detector = std::make_shared<OracleDetectorProvider>(oracle_scene(), config_.oracle);
    if (p.segmenter == "mock:oracle")
        set.segmenter = std::make_shared<OracleTrackerProvider>(oracle_scene(), config_.oracle);
    return set;
}

std::map<std::string, std::string> ProviderFactory::model_names() const { return names_; }

// ---------------------------------------------------------------- stages

CueResult compute_cues(const PipelineConfig& config, const VideoSequence& seq, FlowProvider* flow) {
    CueResult r;
    const int n = seq.size();
    const int w = seq.width();
    const int h = seq.height();

    switch (config.cue_mode) {
        case CueMode::Auto:
            r.decision = classify_camera_motion(seq, config.camera);
            r.route = r.decision->route == MotionRoute::BackgroundSubtraction ? "bgs" : "flow";
            break;
        case CueMode::Flow: r.route = "flow"; break;
        case CueMode::Bgs: r.route = "bgs"; break;
        case CueMode::None: r.route = "none"; break;
    }

    std::vector<std::vector<double>> raw(static_cast<std::size_t>(n));
    if (r.route == "flow") {
        if (!flow) throw ConfigError("flow route selected but no flow provider configured");
        FlowEma ema(config.momentum);
        for (int i = 0; i + 1 < n; ++i) {
            FlowField f = flow->compute(seq.frame(i), seq.frame(i + 1));
            if (f.width() != w || f.height() != h) throw MalformedResponse("flow size does not match the video");
            if (!f.all_finite()) throw MalformedResponse("flow contains non-finite values");
            if (config.mean_subtract) f = subtract_mean_flow(f);
            if (config.use_momentum) f = ema.apply(f, i + 1);
            raw[static_cast<std::size_t>(i)] = flow_magnitude(f);
        }
        // The last frame has no successor; it reuses the final pair's cue.
        raw[static_cast<std::size_t>(n - 1)] = raw[static_cast<std::size_t>(n - 2)];
    } else if (r.route == "bgs") {
        BackgroundModel model(config.bgs);
        for (int i = 0; i < n; ++i) {
            const Frame background = model.update(seq.frame(i));
            raw[static_cast<std::size_t>(i)] = frame_difference(seq.frame(i), background);
        }
    } else {
        for (auto& v : raw) v.assign(static_cast<std::size_t>(w) * h, 0.0);
    }

    double lo = 0, hi = 0;
    if (config.normalize == Normalization::PerVideo) {
        lo = std::numeric_limits<double>::infinity();
        hi = -lo;
        for (const auto& v : raw)
            for (double x : v) {
                lo = std::min(lo, x);
                hi = std::max(hi, x);
            }
    }
    for (int i = 0; i < n; ++i) {
        const auto& v = raw[static_cast<std::size_t>(i)];
        r.intensities.push_back(config.normalize == Normalization::PerVideo ? normalize_to_byte_range(w, h, v, lo, hi)
                                                                            : normalize_to_byte_range(w, h, v));
        r.highlighted.push_back(blend_highlight(seq.frame(i), r.intensities.back(), config.highlight_color));
    }
    return r;
}

std::vector<std::vector<Detection>> detect_video(const PipelineConfig& config, const CueResult& cues,
                                                 DetectorProvider& detector, double min_threshold) {
    const PromptSet prompts = build_prompt_set(config.prompts);
    std::vector<std::vector<Detection>> out;
    for (const auto& hf : cues.highlighted) out.push_back(detect_frame(detector, hf, prompts, min_threshold));
    return out;
}

std::vector<std::optional<Detection>> select_boxes(const std::vector<std::vector<Detection>>& detections,
                                                   double threshold) {
    std::vector<std::optional<Detection>> out;
    for (const auto& frame : detections) {
        std::vector<Detection> kept;
        std::copy_if(frame.begin(), frame.end(), std::back_inserter(kept),
                     [threshold](const Detection& d) { return d.score >= threshold; });
        out.push_back(select_top_box(kept));
    }
    return out;
}

MaskSeries segment_video(const PipelineConfig& config, const VideoSequence& seq, const PromptTimeline& timeline,
                         SegmenterProvider& segmenter) {
    MaskSeries out;
    if (!timeline.empty()) {
        const std::string session = segmenter.open_session(seq);
        try {
            switch (config.track_mode) {
                case TrackMode::None:
                    // No propagation: each detected frame keeps only its own mask.
                    for (const auto& p : timeline.prompts) {
                        const MaskSeries s = segmenter.track(session, PromptTimeline{{p}}, Direction::Forward);
                        if (const auto it = s.masks.find(p.frame_index); it != s.masks.end())
                            out.masks.emplace(p.frame_index, it->second);
                    }
                    break;
                case TrackMode::Forward: out = propagate(segmenter, session, seq, timeline, Direction::Forward); break;
                case TrackMode::Bidirectional:
                    out = merge_bidirectional(propagate(segmenter, session, seq, timeline, Direction::Forward),
                                              propagate(segmenter, session, seq, timeline, Direction::Backward));
                    break;
            }
        } catch (...) {
            segmenter.close_session(session);
            throw;
        }
        segmenter.close_session(session);
    }
    out.video_id = seq.source_id();
    for (const auto& [idx, m] : out.masks)
        if (m.width() != seq.width() || m.height() != seq.height())
            throw MalformedResponse("segmenter mask size does not match the video");
    for (int i = 0; i < seq.size(); ++i) out.masks.try_emplace(i, BinaryMask(seq.width(), seq.height()));
    return out;
}

VideoOutcome process_video(const PipelineConfig& config, const fs::path& video_dir, const ProviderSet& providers,
                           const std::vector<double>& thresholds) {
    const auto t0 = std::chrono::steady_clock::now();
    VideoOutcome out;
    out.video = video_name(video_dir);
    try {
        if (thresholds.empty()) throw InvalidArgument("no detection thresholds given");
        if (!providers.detector || !providers.segmenter) throw ConfigError("detector and segmenter are required");
        const VideoSequence seq = load_sequence(video_dir, config.layout);
        const CueResult cues = compute_cues(config, seq, providers.flow.get());
        out.route = cues.route;
        out.decision = cues.decision;
        const double lowest = *std::min_element(thresholds.begin(), thresholds.end());
        const auto detections = detect_video(config, cues, *providers.detector, lowest);

        std::vector<std::pair<PromptTimeline, const MaskSeries*>> cache;
        for (double thr : thresholds) {
            const auto boxes = select_boxes(detections, thr);
            out.detected_frames[thr] =
                static_cast<int>(std::count_if(boxes.begin(), boxes.end(), [](const auto& b) { return b.has_value(); }));
            const PromptTimeline timeline = assemble_prompts(boxes, cues.intensities, config.prompt_mode);
            const auto hit = std::find_if(cache.begin(), cache.end(),
                                          [&](const auto& c) { return c.first.prompts == timeline.prompts; });
            if (hit != cache.end()) {
                out.masks[thr] = *hit->second;
                continue;
            }
            out.masks[thr] = segment_video(config, seq, timeline, *providers.segmenter);
            out.masks[thr].video_id = out.video;
            cache.emplace_back(timeline, &out.masks[thr]);
        }
    } catch (const std::exception& e) {
        out.error = e.what();
        out.masks.clear();
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

MaskSeries run_video(const PipelineConfig& config, const fs::path& video_dir, const ProviderSet& providers) {
    VideoOutcome o = process_video(config, video_dir, providers, {config.threshold});
    if (o.error) throw Error(o.video + ": " + *o.error);
    return std::move(o.masks.begin()->second);
}

MaskSeries run_video(const PipelineConfig& config, const fs::path& video_dir) {
    const ProviderFactory factory(config);
    return run_video(config, video_dir, factory.for_video(video_dir));
}

// ---------------------------------------------------------------- datasets

std::vector<fs::path> list_videos(const fs::path& root, const DatasetLayout& layout) {
    if (!fs::is_directory(root)) throw IoError("dataset root not found: " + root.string());
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(root)) {
        if (!e.is_directory()) continue;
        if (has_images(e.path() / layout.images_dir) || has_images(e.path())) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::optional<GroundTruth> load_video_ground_truth(const fs::path& video_dir, const PipelineConfig& config,
                                                   std::optional<std::pair<int, int>> size) {
    const fs::path gt_dir = video_dir / config.layout.gt_dir;
    if (!fs::is_directory(gt_dir)) return std::nullopt;
    GroundTruth gt = load_ground_truth(gt_dir, config.gt_stride, size);
    gt.video_id = video_name(video_dir);
    const fs::path boxes = video_dir / config.layout.boxes_file;
    if (fs::is_regular_file(boxes)) {
        gt.boxes = load_boxes_csv(boxes);
    } else {
        for (const auto& [t, m] : gt.masks)
            if (const auto b = mask_extent(m)) gt.boxes.emplace(t, *b);
    }
    return gt;
}

RunRecord run_sweep(const PipelineConfig& config, const fs::path& dataset_root, const std::optional<fs::path>& mask_dir) {
    const auto t0 = std::chrono::steady_clock::now();
    if (config.sweep.empty()) throw ConfigError("detect.sweep is empty");
    std::vector<double> thresholds = config.sweep;
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    const auto videos = list_videos(dataset_root, config.layout);
    if (videos.empty()) throw ConfigError("no videos found under " + dataset_root.string());

    const ProviderFactory factory(config);
    RunRecord record;
    record.version = version_string();
    record.config = config.store.values();
    record.models = factory.model_names();
    record.dataset = video_name(dataset_root);

    std::vector<VideoOutcome> outcomes(videos.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < videos.size(); i = next++) {
            try {
                outcomes[i] = process_video(config, videos[i], factory.for_video(videos[i]), thresholds);
            } catch (const std::exception& e) {
                outcomes[i].video = video_name(videos[i]);
                outcomes[i].error = e.what();
            }
        }
    };
    const int workers = std::min<int>(config.workers, static_cast<int>(videos.size()));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::map<std::string, GroundTruth> gts;
    for (std::size_t i = 0; i < videos.size(); ++i) {
        std::optional<std::pair<int, int>> size;
        if (!outcomes[i].masks.empty()) {
            const auto& m = outcomes[i].masks.begin()->second.masks;
            if (!m.empty()) size = std::pair{m.begin()->second.width(), m.begin()->second.height()};
        }
        try {
            if (auto gt = load_video_ground_truth(videos[i], config, size))
                gts.emplace(outcomes[i].video, std::move(*gt));
        } catch (const Error& e) {
            if (!outcomes[i].error) outcomes[i].error = std::string("ground truth: ") + e.what();
            outcomes[i].masks.clear();
        }
    }

    for (double thr : thresholds) {
        std::map<std::string, MaskSeries> preds;
        for (const auto& o : outcomes)
            if (!o.error) preds.emplace(o.video, o.masks.at(thr));
        record.reports.push_back({thr, evaluate_dataset(preds, gts, config.eval)});
    }

    for (Metric m : kAllMetrics) {
        const bool higher = higher_is_better(m);
        std::optional<BestThreshold> best;
        for (const auto& r : record.reports) {
            const auto v = r.eval.headline(m);
            if (!v) continue;
            if (!best || (higher ? *v > best->value : *v < best->value)) best = BestThreshold{m, r.threshold, *v, 0};
        }
        if (!best) continue;
        double sum = 0;
        std::size_t count = 0;
        for (std::size_t vi = 0; vi < record.reports.front().eval.videos.size(); ++vi) {
            std::optional<double> vbest;
            for (const auto& r : record.reports) {
                const VideoEval& ve = r.eval.videos[vi];
                if (ve.frames.empty()) continue;
                const double v = ve.mean(m);
                if (!vbest || (higher ? v > *vbest : v < *vbest)) vbest = v;
            }
            if (vbest) {
                sum += *vbest;
                ++count;
            }
        }
        best->per_video_value = count ? sum / static_cast<double>(count) : 0.0;
        record.best.push_back(*best);
    }

    if (mask_dir) {
        double thr = thresholds.front();
        for (const auto& b : record.best)
            if (b.metric == Metric::IoU) thr = b.threshold;
        for (const auto& o : outcomes)
            if (!o.error) save_mask_series(o.masks.at(thr), *mask_dir / o.video);
    }

    for (auto& o : outcomes) o.masks.clear();
    std::sort(outcomes.begin(), outcomes.end(), [](const auto& a, const auto& b) { return a.video < b.video; });
    record.videos = std::move(outcomes);
    record.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return record;
}

// ---------------------------------------------------------------- reports

json eval_report_json(const EvalReport& report) {
    json aggregates = json::object();
    for (const auto& [mode, metrics] : report.aggregates) {
        json mj = json::object();
        for (const auto& [m, v] : metrics) mj[to_string(m)] = optional_number(v);
        aggregates[to_string(mode)] = mj;
    }
    json sr = json::object();
    for (const auto& [mode, v] : report.success_rate) sr[to_string(mode)] = optional_number(v);
    json videos = json::array();
    for (const auto& v : report.videos) {
        json means = json::object();
        if (!v.frames.empty())
            for (Metric m : kAllMetrics) means[to_string(m)] = v.mean(m);
        videos.push_back({{"video", v.video},
                          {"frames", v.frames.size()},
                          {"missing_prediction", v.missing_prediction},
                          {"success_rate", optional_number(v.success_rate)},
                          {"means", means}});
    }
    return {{"flags",
             {{"mode", to_string(report.flags.mode)},
              {"omit_last_frame", report.flags.omit_last_frame},
              {"binarize_threshold", report.flags.binarize_threshold},
              {"dsr_tau", report.flags.dsr_tau}}},
            {"empty_gt_rule", kEmptyGroundTruthRule},
            {"aggregates", aggregates},
            {"success_rate", sr},
            {"videos", videos},
            {"warnings", report.warnings}};
}

json run_record_json(const RunRecord& record) {
    json videos = json::array();
    for (const auto& v : record.videos) {
        json detected = json::object();
        for (const auto& [t, n] : v.detected_frames) detected[format_threshold(t)] = n;
        json decision = nullptr;
        if (v.decision)
            decision = {{"route", to_string(v.decision->route)},
                        {"max_excursion", v.decision->max_excursion},
                        {"degenerate_pairs", v.decision->degenerate_pairs},
                        {"pair_count", v.decision->pair_count}};
        videos.push_back({{"video", v.video},
                          {"route", v.route},
                          {"camera", decision},
                          {"detected_frames", detected},
                          {"error", v.error ? json(*v.error) : json(nullptr)}});
    }
    json reports = json::array();
    for (const auto& r : record.reports)
        reports.push_back({{"threshold", r.threshold}, {"eval", eval_report_json(r.eval)}});
    json best = json::array();
    for (const auto& b : record.best)
        best.push_back({{"metric", to_string(b.metric)},
                        {"global_threshold", b.threshold},
                        {"global_value", b.value},
                        {"per_video_best_value", b.per_video_value}});
    return {{"version", record.version}, {"dataset", record.dataset}, {"config", record.config},
            {"models", record.models},   {"videos", videos},          {"reports", reports},
            {"best", best}};
}

void emit_report(const RunRecord& record, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    write_text(out_dir / "report.json", run_record_json(record).dump(2) + "\n");

    std::ostringstream csv;
    csv << "threshold,mode,metric,value\n";
    for (const auto& r : record.reports) {
        for (const auto& [mode, metrics] : r.eval.aggregates)
            for (const auto& [m, v] : metrics)
                csv << format_threshold(r.threshold) << ',' << to_string(mode) << ',' << to_string(m) << ','
                    << (v ? format_threshold(*v) : "") << '\n';
        for (const auto& [mode, v] : r.eval.success_rate)
            csv << format_threshold(r.threshold) << ',' << to_string(mode) << ",success_rate,"
                << (v ? format_threshold(*v) : "") << '\n';
    }
    write_text(out_dir / "report.csv", csv.str());

    std::ostringstream md;
    md << "# Run summary\n\n";
    md << "- version: " << record.version << "\n- dataset: " << record.dataset << "\n";
    for (const auto& [role, name] : record.models) md << "- " << role << " model: " << name << "\n";
    md << "- aggregation: " << record.config.at("eval.agg_mode") << "\n\n";

    md << "## Thresholds\n\n| threshold | S | wF | E | MAE | mIoU | mDice | SR |\n|---|---|---|---|---|---|---|---|\n";
    for (const auto& r : record.reports) {
        const auto sr = r.eval.success_rate.count(r.eval.flags.mode) ? r.eval.success_rate.at(r.eval.flags.mode)
                                                                      : std::nullopt;
        md << "| " << format_threshold(r.threshold) << " | " << fmt(r.eval.headline(Metric::SMeasure)) << " | "
           << fmt(r.eval.headline(Metric::WeightedF)) << " | " << fmt(r.eval.headline(Metric::EMeasure)) << " | "
           << fmt(r.eval.headline(Metric::Mae), 4) << " | " << fmt(r.eval.headline(Metric::IoU)) << " | "
           << fmt(r.eval.headline(Metric::Dice)) << " | " << fmt(sr) << " |\n";
    }

    md << "\n## Best threshold\n\nTwo readings: one threshold for the whole dataset, or each video at its own best "
          "threshold.\n\n| metric | dataset threshold | dataset value | per-video best |\n|---|---|---|---|\n";
    std::optional<double> best_iou_thr;
    for (const auto& b : record.best) {
        md << "| " << to_string(b.metric) << " | " << format_threshold(b.threshold) << " | " << fmt(b.value, 4)
           << " | " << fmt(b.per_video_value, 4) << " |\n";
        if (b.metric == Metric::IoU) best_iou_thr = b.threshold;
    }

    md << "\n## Per-video mIoU\n\n|";
    for (const auto& c : kPerVideoColumns) md << ' ' << c << " |";
    md << "\n|";
    for (std::size_t i = 0; i < kPerVideoColumns.size(); ++i) md << "---|";
    md << '\n';
    const ThresholdReport* best_report = nullptr;
    for (const auto& r : record.reports)
        if (best_iou_thr && r.threshold == *best_iou_thr) best_report = &r;
    for (const auto& v : record.videos) {
        std::optional<double> at_best, video_best;
        for (const auto& r : record.reports)
            for (const auto& ve : r.eval.videos)
                if (ve.video == v.video && !ve.frames.empty()) {
                    const double iou = ve.mean(Metric::IoU);
                    if (&r == best_report) at_best = iou;
                    if (!video_best || iou > *video_best) video_best = iou;
                }
        std::optional<int> detected;
        if (best_iou_thr && v.detected_frames.count(*best_iou_thr)) detected = v.detected_frames.at(*best_iou_thr);
        std::string status = v.error ? "failed" : (at_best ? "ok" : "no ground truth");
        md << "| " << v.video << " | " << (v.route.empty() ? "-" : v.route) << " | "
           << (detected ? std::to_string(*detected) : "-") << " | " << fmt(at_best) << " | " << fmt(video_best) << " | "
           << status << " |\n";
    }

    bool any_failed = false;
    for (const auto& v : record.videos)
        if (v.error) {
            if (!any_failed) md << "\n## Failures\n\n";
            any_failed = true;
            md << "- " << v.video << ": " << *v.error << "\n";
        }
    std::set<std::string> warnings;
    for (const auto& r : record.reports) warnings.insert(r.eval.warnings.begin(), r.eval.warnings.end());
    if (!warnings.empty()) {
        md << "\n## Warnings\n\n";
        for (const auto& w : warnings) md << "- " << w << "\n";
    }
    write_text(out_dir / "summary.md", md.str());

    json timing = {{"total_seconds", record.total_seconds}, {"videos", json::object()}};
    for (const auto& v : record.videos) timing["videos"][v.video] = v.seconds;
    write_text(out_dir / "timing.json", timing.dump(2) + "\n");
}

EvalReport evaluate_predictions(const fs::path& pred_root, const fs::path& dataset_root, const PipelineConfig& config) {
    if (!fs::is_directory(pred_root)) throw IoError("prediction directory not found: " + pred_root.string());
    std::map<std::string, GroundTruth> gts;
    std::map<std::string, MaskSeries> preds;
    for (const auto& dir : list_videos(dataset_root, config.layout)) {
        auto gt = load_video_ground_truth(dir, config);
        if (!gt) continue;
        const std::string id = video_name(dir);
        const fs::path pdir = pred_root / id;
        if (fs::is_directory(pdir)) {
            MaskSeries series;
            series.video_id = id;
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(pdir))
                if (e.is_regular_file()) files.push_back(e.path());
            std::sort(files.begin(), files.end());
            for (const auto& f : files) {
                const std::string stem = f.stem().string();
                int idx = 0;
                const auto [ptr, ec] = std::from_chars(stem.data(), stem.data() + stem.size(), idx);
                if (ec != std::errc() || ptr != stem.data() + stem.size()) continue;
                series.masks.emplace(idx, binarize(read_soft_map(f), config.eval.binarize_threshold));
            }
            preds.emplace(id, std::move(series));
        }
        gts.emplace(id, std::move(*gt));
    }
    if (gts.empty()) throw IoError("no ground truth found under " + dataset_root.string());
    return evaluate_dataset(preds, gts, config.eval);
}

void emit_eval_report(const EvalReport& report, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    write_text(out_dir / "eval.json", eval_report_json(report).dump(2) + "\n");
    std::ostringstream md;
    md << "# Evaluation\n\n- aggregation: " << to_string(report.flags.mode) << "\n- omit last frame: "
       << (report.flags.omit_last_frame ? "yes" : "no") << "\n\n| metric | value |\n|---|---|\n";
    for (Metric m : kAllMetrics) md << "| " << to_string(m) << " | " << fmt(report.headline(m), 4) << " |\n";
    if (report.success_rate.count(report.flags.mode))
        md << "| SR | " << fmt(report.success_rate.at(report.flags.mode), 4) << " |\n";
    md << "\n| video | frames | mIoU |\n|---|---|---|\n";
    for (const auto& v : report.videos)
        md << "| " << v.video << " | " << v.frames.size() << " | "
           << (v.frames.empty() ? "-" : fmt(v.mean(Metric::IoU))) << " |\n";
    write_text(out_dir / "eval.md", md.str());
}

}  // namespace vcos
