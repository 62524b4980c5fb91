// Copyright 2026 The maskpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "maskpipe/backends.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace maskpipe {

/// Frame index -> detections of that frame.
using DetectionsDocument = std::map<int, std::vector<Detection>>;

class SidecarFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// {"frames":[{"index":n,"detections":[{"bbox":[x0,y0,x1,y1],"score":s,"label":"person"}]}]}
std::string detections_to_json(const DetectionsDocument& doc);
DetectionsDocument parse_detections(const std::string& json_text);

inline constexpr const char* kDetectionsFile = "detections.json";

/// "mask.<frame:04>.<det:02>.pgm"
std::string sidecar_mask_name(int frame, int detection);

/// Writes detections.json and one 8-bit mask per detection (value/255 = probability).
void write_sidecar(const std::filesystem::path& dir, const DetectionsDocument& doc,
                   const std::map<std::pair<int, int>, ProbMask>& masks);

/// Answers detection and box-segmentation requests from externally computed
/// model outputs stored in a directory.
class SidecarBackend final : public Detector, public PromptableSegmenter {
public:
    SidecarBackend(std::filesystem::path dir, FrameSize size, DetectionsDocument doc)
        : dir_(std::move(dir)), size_(size), doc_(std::move(doc))
    {}

    /// `expected` is checked against every mask that is read.
    static std::shared_ptr<SidecarBackend> load(const std::filesystem::path& dir, FrameSize expected);

    FrameSize frame_size() const override { return size_; }

    /// Returns the recorded detections of the frame regardless of prompt.
    /// A frame absent from the document yields an empty list and a warning.
    std::vector<Detection> detect(int frame, std::string_view prompt) const override;

    /// Reads the mask recorded for the detection whose box best matches.
    /// Throws BackendError when the mask file is missing.
    ProbMask segment_box(int frame, const Box& box) const override;

    /// Not available from recorded outputs; always throws BackendError.
    ProbMask segment_points(int frame, std::span<const Point> positive,
                            std::span<const Point> negative) const override;

    const DetectionsDocument& document() const { return doc_; }
    std::vector<std::string> warnings() const;

private:
    std::filesystem::path dir_;
    FrameSize size_;
    DetectionsDocument doc_;
    mutable std::mutex warn_mutex_;
    mutable std::vector<std::string> warnings_;
};

}  // namespace maskpipe
