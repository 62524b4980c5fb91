// Copyright 2026 The maskpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "maskpipe/postprocess.hpp"
#include "maskpipe/tracking.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace maskpipe {

enum class BackendKind { Synthetic, Sidecar };

const char* to_string(BackendKind kind);
BackendKind parse_backend(const std::string& name);

struct PipelineConfig {
    std::string prompt = "person";
    double discard_thresh = 0.1;
    double merge_thresh = 0.6;
    double direct_match_iou = 0.9;
    double epsilon = 0.1;
    int prompt_step = 5;
    int track_interval = 20;
    double binarize_tau = 0.5;
    int max_dim = 1024;
    BackendKind backend = BackendKind::Synthetic;
    /// Overrides the synthetic scene's own seed when set.
    std::optional<std::uint64_t> seed;
    /// Frame-parallel workers for stages 1 and 2; 0 picks the hardware count.
    int workers = 0;

    void validate() const;
    PostprocessThresholds postprocess() const { return {discard_thresh, merge_thresh}; }
    TrackingParams tracking() const;

    /// Applies one `key = value` setting. Throws on unknown keys or bad values.
    void set(const std::string& key, const std::string& value);

    bool operator==(const PipelineConfig&) const = default;
};

/// Flat `key = value` text, one setting per line, `#` starts a comment.
/// Keys: prompt, discard_thresh, merge_thresh, direct_match_iou, epsilon,
/// s_P, s_T, binarize_tau, max_dim, backend, seed, workers.
PipelineConfig parse_config(const std::string& text, PipelineConfig base = {});
std::string config_to_text(const PipelineConfig& config);

}  // namespace maskpipe
