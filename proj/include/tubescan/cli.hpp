// Copyright 2026 The tubescan Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TUBESCAN_CLI_HPP
#define TUBESCAN_CLI_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tubescan/metrics.hpp"
#include "tubescan/mosaic.hpp"
#include "tubescan/simgen.hpp"
#include "tubescan/tubelet.hpp"

namespace tubescan {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitInternal = 2;
inline constexpr int kExitRegistration = 3;

struct MosaicSettings {
    // Unset: association radius divided by the reference frame's GSD.
    std::optional<double> dedupe_radius_px;
    HeatmapMode heatmap_mode = HeatmapMode::normalized;
    double raster_scale = 8.0;  // mosaic px per heatmap px
    double alpha = 0.5;
    double truncation_sigmas = 4.0;
    double threshold = 0.0;
    double max_unregistered_fraction = 0.5;
    CorrelationConfig correlation;
};

/// Everything the subcommands read from --config.
struct ToolConfig {
    PipelineConfig pipeline;
    AssociationConfig association;
    MosaicSettings mosaic;
    SurveyScenario scenario = SurveyScenario::reference_survey();
    int threads = 1;

    void validate() const;
};

ToolConfig config_from_json(const nlohmann::json& json);
nlohmann::json config_to_json(const ToolConfig& config);

/// Confusion CSV: header "label,<l1>,...,<ln>" then one row per label.
struct ConfusionTable {
    std::vector<std::string> labels;
    std::vector<std::vector<std::int64_t>> counts;
};

ConfusionTable parse_confusion_csv(const std::string& text, const std::string& source);

/// Per-class table in the familiar precision/recall/F1/support layout.
std::string format_classification_table(const MetricsReport& report);

/// Entry point behind the tubescan binary. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tubescan

#endif  // TUBESCAN_CLI_HPP
