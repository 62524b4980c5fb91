// Copyright 2026 The maskpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "maskpipe/mask.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace maskpipe {

using LayerKey = std::uint32_t;

struct Layer {
    LayerKey key = 0;
    BinaryMask mask;
    std::string label;

    bool operator==(const Layer&) const = default;
};

/// Instance layers of a single frame.
struct FrameLayers {
    int frame_index = 0;
    std::vector<Layer> layers;

    const Layer* find(LayerKey key) const;
    bool operator==(const FrameLayers&) const = default;
};

struct PostprocessThresholds {
    double discard = 0.1;
    double merge = 0.6;
};

struct PostprocessEvent {
    enum class Kind { DropEmpty, Discard, Merge };

    Kind kind = Kind::Discard;
    LayerKey key = 0;
    /// Merge destination; unused for the other kinds.
    LayerKey into = 0;
    /// (other key, sim_asym(this, other)) for every overlap that triggered the event.
    std::vector<std::pair<LayerKey, double>> overlaps;
};

const char* to_string(PostprocessEvent::Kind kind);

struct PostprocessReport {
    std::vector<PostprocessEvent> events;

    bool discarded(LayerKey key) const;
    bool merged(LayerKey key) const;
    bool empty() const { return events.empty(); }
};

/// Removes likely false positives and merges fragments of the same instance.
///
/// Empty masks are dropped first. Then, until nothing changes:
///   - every layer A that has at least two other layers B with
///     sim_asym(A, B) >= discard is removed (decided on a snapshot);
///   - walking the survivors in order, a layer A with exactly one other live
///     layer B where sim_asym(A, B) >= merge is united into B. B keeps its key.
///
/// Repeating the round makes the result a fixed point, so applying the
/// function to its own output changes nothing.
std::pair<FrameLayers, PostprocessReport> postprocess_frame(const FrameLayers& input,
                                                            PostprocessThresholds thresholds = {});

}  // namespace maskpipe
