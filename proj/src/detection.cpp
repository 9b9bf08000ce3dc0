#include "vcos/detection.hpp"

#include <algorithm>

#include "vcos/errors.hpp"
#include "vcos/providers.hpp"

namespace vcos {

std::vector<std::string> PromptSet::queries() const {
    std::vector<std::string> q;
    q.reserve(1 + negatives.size());
    q.push_back(positive);
    q.insert(q.end(), negatives.begin(), negatives.end());
    return q;
}

PromptVariant parse_prompt_variant(const std::string& name) {
    // Letters follow the prompting ablation rows; "d" is the full prompt.
    if (name == "full" || name == "default" || name == "d") return PromptVariant::Full;
    if (name == "no_category" || name == "a") return PromptVariant::NoCategory;
    if (name == "no_highlight" || name == "b") return PromptVariant::NoHighlight;
    if (name == "no_negatives" || name == "c") return PromptVariant::NoNegatives;
    throw ConfigError("unknown prompt variant '" + name + "'");
}

const char* to_string(PromptVariant v) {
    switch (v) {
        case PromptVariant::Full: return "full";
        case PromptVariant::NoCategory: return "no_category";
        case PromptVariant::NoHighlight: return "no_highlight";
        case PromptVariant::NoNegatives: return "no_negatives";
    }
    return "full";
}

PromptSet build_prompt_set(const PromptConfig& config) {
    PromptSet set;
    const std::string subject =
        config.variant == PromptVariant::NoCategory ? "an object" : "an animal or insect";
    set.positive = config.variant == PromptVariant::NoHighlight
                       ? subject
                       : subject + " being highlighted in " + config.color_name;
    if (config.variant != PromptVariant::NoNegatives) set.negatives = {"background", "logo or sign", "plant"};

    if (!config.positive_override.empty()) set.positive = config.positive_override;
    if (config.negatives_override) set.negatives = *config.negatives_override;
    if (set.positive.empty()) throw ConfigError("positive prompt must not be empty");
    return set;
}

std::vector<Detection> detect_frame(DetectorProvider& provider, const HighlightedFrame& frame, const PromptSet& prompts,
                                    double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw InvalidArgument("detection threshold must lie in (0, 1)");
    const auto queries = prompts.queries();
    const auto raw = provider.detect(frame.frame, queries, threshold);

    const double w = frame.frame.width();
    const double h = frame.frame.height();
    std::vector<Detection> kept;
    for (Detection d : raw) {
        if (d.label_index < 0 || d.label_index >= static_cast<int>(queries.size()))
            throw MalformedResponse("detection label_index out of range");
        if (!(d.score >= threshold)) continue;
        d.score = std::min(d.score, 1.0);
        d.box.x0 = std::clamp(d.box.x0, 0.0, w);
        d.box.x1 = std::clamp(d.box.x1, 0.0, w);
        d.box.y0 = std::clamp(d.box.y0, 0.0, h);
        d.box.y1 = std::clamp(d.box.y1, 0.0, h);
        if (!d.box.valid()) continue;
        kept.push_back(d);
    }
    return kept;
}

std::optional<Detection> select_top_box(const std::vector<Detection>& detections) {
    std::optional<Detection> best;
    for (const auto& d : detections) {
        if (d.label_index != kPositiveLabel) continue;
        if (!best) {
            best = d;
            continue;
        }
        if (d.score != best->score) {
            if (d.score > best->score) best = d;
        } else if (d.box.area() != best->box.area()) {
            if (d.box.area() > best->box.area()) best = d;
        } else if (d.box.x0 < best->box.x0) {
            best = d;
        }
    }
    return best;
}

}  // namespace vcos
