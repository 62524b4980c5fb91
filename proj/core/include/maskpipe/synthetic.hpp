// Copyright 2026 The maskpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "maskpipe/backends.hpp"
#include "maskpipe/image_io.hpp"
#include "maskpipe/mask.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace maskpipe {

enum class ShapeKind { Rectangle, Ellipse };

/// Object placement at a keyframe. Placement between keyframes is linear.
struct ShapeKey {
    int frame = 0;
    double cx = 0, cy = 0, w = 0, h = 0;
};

/// Sub-region of an object (e.g. an arm), positioned relative to the object centre.
struct ObjectPart {
    std::string name;
    ShapeKind shape = ShapeKind::Rectangle;
    double dx = 0, dy = 0, w = 0, h = 0;
};

struct SceneObject {
    std::string label = "person";
    ShapeKind shape = ShapeKind::Rectangle;
    int appear = 0;
    /// Exclusive; -1 means the object stays until the end of the shot.
    int disappear = -1;
    std::vector<ShapeKey> keys;
    std::vector<ObjectPart> parts;
};

struct NoiseProfile {
    double duplicate_rate = 0.0;
    double merged_false_positive_rate = 0.0;
    double miss_rate = 0.0;
    int boundary_jitter_px = 0;
    double tracker_confidence_decay = 0.0;
};

struct SceneSpec {
    std::string id = "synthetic";
    int width = 64;
    int height = 64;
    int frame_count = 1;
    std::uint64_t seed = 0;
    std::vector<SceneObject> objects;
    NoiseProfile noise;
};

SceneSpec parse_scene_spec(const std::string& json_text);
std::string scene_spec_to_json(const SceneSpec& spec);

inline constexpr float kTrackerStartConfidence = 0.95f;

/// Deterministic stand-in for the detection, segmentation and tracking models.
///
/// Objects are rasterised per frame; later objects occlude earlier ones. The
/// visible pixels of an object form its ground-truth mask. Noise decisions are
/// pure functions of (seed, frame, object, purpose), so every output is
/// reproducible and independent of call order.
class SyntheticScene final : public Detector, public PromptableSegmenter, public VideoTracker {
public:
    explicit SyntheticScene(SceneSpec spec);

    const SceneSpec& spec() const { return spec_; }
    FrameSize frame_size() const override { return {spec_.width, spec_.height}; }
    int frame_count() const { return spec_.frame_count; }
    int object_count() const { return static_cast<int>(spec_.objects.size()); }

    /// 0 = background, i+1 = object i.
    const Grid<std::uint16_t>& label_image(int frame) const;
    BinaryMask object_mask(int frame, int object) const;
    bool visible(int frame, int object) const;

    std::vector<Detection> detect(int frame, std::string_view prompt) const override;
    ProbMask segment_box(int frame, const Box& box) const override;
    ProbMask segment_points(int frame, std::span<const Point> positive,
                            std::span<const Point> negative) const override;
    std::vector<TrackerPrediction> track(std::span<const int> frames,
                                         const std::map<LayerId, BinaryMask>& prompt) const override;

    /// Flat-shaded RGB rendering of a frame.
    Image render(int frame) const;

private:
    void check_frame(int frame) const;
    bool active(int frame, int object) const;
    ShapeKey placement(int frame, int object) const;
    BinaryMask shape_mask(int frame, int object, bool with_parts) const;
    BinaryMask part_mask(int frame, int object, std::size_t part) const;
    BinaryMask jitter(const BinaryMask& mask, int frame, std::uint64_t salt) const;
    double roll(int frame, std::uint64_t a, std::uint64_t b, std::uint64_t purpose) const;

    SceneSpec spec_;
    std::vector<Grid<std::uint16_t>> labels_;
};

/// Probabilities 1.0 in the interior falling to 0.5 on the mask boundary.
ProbMask confidence_ramp(const BinaryMask& mask, int ramp_px = 3);

}  // namespace maskpipe
