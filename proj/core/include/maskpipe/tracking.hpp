// Copyright 2026 The maskpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "maskpipe/backends.hpp"
#include "maskpipe/mask.hpp"
#include "maskpipe/postprocess.hpp"

#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace maskpipe {

using IdGrid = Grid<LayerId>;

/// Per-pixel layer id (0 = background) and the probability of that assignment.
struct CacheFrame {
    IdGrid ids;
    ProbMask probs;

    CacheFrame() = default;
    CacheFrame(int width, int height) : ids(width, height, 0), probs(width, height, 0.0f) {}

    int width() const { return ids.width(); }
    int height() const { return ids.height(); }
    bool is_empty() const;

    bool operator==(const CacheFrame&) const = default;
};

struct MaskCache {
    std::vector<CacheFrame> frames;

    MaskCache() = default;
    MaskCache(int frame_count, int width, int height);

    int frame_count() const { return static_cast<int>(frames.size()); }
    bool operator==(const MaskCache&) const = default;
};

struct LayerInfo {
    std::string label;
    int first_seen_frame = 0;

    bool operator==(const LayerInfo&) const = default;
};

/// Allocates layer ids monotonically starting at 1. Ids are never reused.
class LayerRegistry {
public:
    LayerId allocate(std::string label, int frame);
    bool contains(LayerId id) const { return entries_.count(id) != 0; }
    const LayerInfo& at(LayerId id) const;
    const std::map<LayerId, LayerInfo>& entries() const { return entries_; }
    LayerId next_id() const { return next_id_; }

    /// Restores a persisted registry; `next_id` must exceed every entry.
    static LayerRegistry restore(LayerId next_id, std::map<LayerId, LayerInfo> entries);

    bool operator==(const LayerRegistry&) const = default;

private:
    LayerId next_id_ = 1;
    std::map<LayerId, LayerInfo> entries_;
};

struct TrackingParams {
    /// Frames between re-prompts.
    int prompt_step = 5;
    /// Frames tracked ahead of each prompt.
    int track_interval = 20;
    /// Margin a new prediction must beat the cached probability by.
    double epsilon = 0.1;
    double direct_match_iou = 0.9;
    PostprocessThresholds partial{0.1, 0.6};
    /// Cache probability at which a pixel counts as part of its layer.
    double binarize_tau = 0.5;
    /// Extra forward prompt frames, e.g. artist keyframes.
    std::vector<int> keyframes;

    void validate() const;
};

/// Absolute slack applied to the epsilon comparison so that decimal
/// probabilities stored as float compare as written.
inline constexpr double kProbTolerance = 1e-6;

/// True when a cached probability should be replaced by `candidate`.
bool beats_cache(double cached, double candidate, double epsilon);

/// Merges one tracker prediction into a cache frame.
///
/// An empty cache frame takes the prediction verbatim (per pixel the arg-max
/// layer and its probability). Otherwise a pixel is overwritten only where
/// cached + epsilon <= predicted max. Ties in the arg-max go to the lowest id.
CacheFrame merge_prediction(const CacheFrame& frame, const TrackerPrediction& pred,
                            const LayerRegistry& registry, double epsilon);

/// Per-layer binary masks of a cache frame (prob >= tau).
std::map<LayerId, BinaryMask> cache_layers(const CacheFrame& frame, double tau);

enum class MatchKind { Direct, Partial, DroppedMultiple, DroppedWeak, NewLayer };
const char* to_string(MatchKind kind);

struct MatchEntry {
    LayerKey stage2_key = 0;
    MatchKind kind = MatchKind::NewLayer;
    /// Target layer for Direct, Partial and NewLayer.
    LayerId layer = 0;
    /// IoU for Direct, strongest asymmetric overlap otherwise.
    double metric = 0.0;
    std::vector<LayerId> overlapping;
};

struct PromptBuild {
    std::map<LayerId, BinaryMask> prompt;
    LayerRegistry registry;
    std::vector<MatchEntry> report;
};

/// Combines the cache content at a frame with that frame's stage-2 masks into
/// a tracker prompt. The cache content is the template; stage-2 masks are
/// united into the layer they match, dropped when ambiguous, or given a new id.
PromptBuild build_prompt_mask(const CacheFrame& frame, const FrameLayers& stage2,
                              const LayerRegistry& registry, const TrackingParams& params);

struct TrackingState {
    MaskCache cache;
    LayerRegistry registry;

    bool operator==(const TrackingState&) const = default;
};

class TrackingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// (steps done, steps total) over both passes.
using ProgressFn = std::function<void(int, int)>;

std::vector<int> forward_schedule(int shot_len, const TrackingParams& params);
std::vector<int> backward_schedule(int shot_len, const TrackingParams& params);

/// Frames tracked from prompt frame `t`, in tracking order.
std::vector<int> tracking_range(int t, int shot_len, int interval, bool reverse);

TrackingState forward_pass(int shot_len, const std::map<int, FrameLayers>& stage2,
                           const VideoTracker& tracker, const TrackingParams& params,
                           TrackingState state, const ProgressFn& progress = {},
                           int steps_before = 0, int steps_total = 0);

/// Same mechanics in reverse. Stage-2 masks are consulted only at the last
/// frame; every other prompt comes from the cache.
TrackingState backward_pass(int shot_len, const std::map<int, FrameLayers>& stage2,
                            const VideoTracker& tracker, const TrackingParams& params,
                            TrackingState state, const ProgressFn& progress = {},
                            int steps_before = 0, int steps_total = 0);

/// Forward then backward pass over a fresh cache.
TrackingState track_shot(int shot_len, FrameSize size, const std::map<int, FrameLayers>& stage2,
                         const VideoTracker& tracker, const TrackingParams& params,
                         bool backward = true, const ProgressFn& progress = {});

/// Per-frame layers for every registered id (possibly empty on a frame).
std::vector<FrameLayers> finalize(const MaskCache& cache, const LayerRegistry& registry,
                                  double tau = 0.5);

}  // namespace maskpipe
