// Copyright 2026 The maskpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "maskpipe/mask.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace maskpipe {

using LayerId = std::uint32_t;

struct FrameSize {
    int width = 0;
    int height = 0;
    bool operator==(const FrameSize&) const = default;
};

struct Detection {
    Box bbox;
    double score = 0.0;
    /// Sub-prompt that produced the box.
    std::string label;

    bool operator==(const Detection&) const = default;
};

struct Point {
    int x = 0;
    int y = 0;
    bool operator==(const Point&) const = default;
};

/// Per-layer tracker output for one frame.
struct TrackerPrediction {
    int frame_index = 0;
    std::map<LayerId, ProbMask> per_layer;
};

/// Raised by a backend that cannot answer a request (missing sidecar data,
/// unsupported prompt mode, model failure).
class BackendError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Splits "person, car" into {"person", "car"}. Empty pieces are skipped.
std::vector<std::string> split_prompt(std::string_view prompt);

class Detector {
public:
    virtual ~Detector() = default;
    virtual FrameSize frame_size() const = 0;
    /// Sub-prompts are detected independently and their results concatenated.
    virtual std::vector<Detection> detect(int frame, std::string_view prompt) const = 0;
};

class PromptableSegmenter {
public:
    virtual ~PromptableSegmenter() = default;
    virtual FrameSize frame_size() const = 0;
    virtual ProbMask segment_box(int frame, const Box& box) const = 0;
    virtual ProbMask segment_points(int frame, std::span<const Point> positive,
                                    std::span<const Point> negative) const = 0;
};

class VideoTracker {
public:
    virtual ~VideoTracker() = default;
    virtual FrameSize frame_size() const = 0;
    /// `frames` lists the frames to predict in tracking order; the prompt
    /// applies to frames.front(). Returns one prediction per listed frame,
    /// keeping the prompt's layer ids.
    virtual std::vector<TrackerPrediction> track(std::span<const int> frames,
                                                 const std::map<LayerId, BinaryMask>& prompt) const = 0;
};

/// Repeats the prompt masks on every frame of the range. Used with the
/// sidecar backend, which carries no tracking model.
class IdentityTracker final : public VideoTracker {
public:
    explicit IdentityTracker(FrameSize size, double confidence = 0.95, double decay = 0.0)
        : size_(size), confidence_(confidence), decay_(decay)
    {}

    FrameSize frame_size() const override { return size_; }
    std::vector<TrackerPrediction> track(std::span<const int> frames,
                                         const std::map<LayerId, BinaryMask>& prompt) const override;

private:
    FrameSize size_;
    double confidence_;
    double decay_;
};

}  // namespace maskpipe
