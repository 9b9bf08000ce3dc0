#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vcos/motion_cues.hpp"
#include "vcos/video_model.hpp"

namespace vcos {

class DetectorProvider;

// Query list sent to the open-vocabulary detector. Index 0 is the positive
// query; the negatives follow in order and act as distractor sinks.
struct PromptSet {
    std::string positive;
    std::vector<std::string> negatives;

    std::vector<std::string> queries() const;
    friend bool operator==(const PromptSet&, const PromptSet&) = default;
};

enum class PromptVariant {
    Full,         // category prior, highlight mention, negatives
    NoCategory,   // "object" instead of "animal or insect"
    NoHighlight,  // no mention of the highlight color
    NoNegatives,
};

PromptVariant parse_prompt_variant(const std::string& name);
const char* to_string(PromptVariant v);

struct PromptConfig {
    PromptVariant variant = PromptVariant::Full;
    std::string color_name = "blue";
    // Non-empty overrides replace the generated text verbatim.
    std::string positive_override;
    std::optional<std::vector<std::string>> negatives_override;
};

PromptSet build_prompt_set(const PromptConfig& config = {});

struct Detection {
    BoundingBox box;
    double score = 0;
    int label_index = 0;

    friend bool operator==(const Detection&, const Detection&) = default;
};

constexpr int kPositiveLabel = 0;

// Queries the provider and keeps detections scoring at least `threshold`.
std::vector<Detection> detect_frame(DetectorProvider& provider, const HighlightedFrame& frame, const PromptSet& prompts,
                                    double threshold);

// Highest-scoring positive-labeled detection; ties go to the larger box, then the smaller x0.
std::optional<Detection> select_top_box(const std::vector<Detection>& detections);

}  // namespace vcos
