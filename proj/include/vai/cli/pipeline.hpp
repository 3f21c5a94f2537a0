#pragma once

#include <string>
#include <vector>

#include "vai/core/config.hpp"

namespace vai::cli {

// Pipeline stage entry points. Each reads its inputs from and writes its
// artifacts under the configured output_dir, and appends a record of the
// resolved config, input/output hashes, and wall time to run.log there.
// Missing upstream artifacts raise MissingArtifactError naming the path.
void run_collect(const Config& cfg);
void run_train_keypoints(const Config& cfg);
void run_extract_masks(const Config& cfg);
void run_train_adapter(const Config& cfg);
void run_train_policy(const Config& cfg);
void run_evaluate(const Config& cfg);

// Renders raw/adapted image grids plus keypoint and mask overlays for the
// given frames (paths to PPM files). With no inputs, uses the first frames
// of the collected dataset. Unreadable inputs are skipped with a warning;
// throws only if none can be read.
void run_visualize(const Config& cfg, const std::vector<std::string>& inputs);

// Artifact locations under output_dir, shared by stages and tests.
std::string dataset_dir(const Config& cfg);
std::string masks_dir(const Config& cfg);
std::string transporter_path(const Config& cfg);
std::string adapter_path(const Config& cfg);
std::string policy_path(const Config& cfg);

}  // namespace vai::cli
