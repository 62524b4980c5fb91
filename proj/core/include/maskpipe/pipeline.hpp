// Copyright 2026 The maskpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "maskpipe/backends.hpp"
#include "maskpipe/config.hpp"
#include "maskpipe/image_io.hpp"
#include "maskpipe/objectid.hpp"
#include "maskpipe/postprocess.hpp"
#include "maskpipe/sidecar.hpp"
#include "maskpipe/synthetic.hpp"
#include "maskpipe/tracking.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace maskpipe {

/// Downscale-only: if max(w,h) > max_dim both sides are scaled by
/// max_dim/max(w,h) and rounded to the nearest integer.
FrameSize resize_policy(int width, int height, int max_dim);

/// A contiguous image sequence on disk.
///
/// Layout: `shot.json` ({"id","frames","width","height","frame_pattern"}),
/// frames named by `frame_pattern` (printf-style, e.g. "frames/frame.%04d.ppm"),
/// and optionally `scene.json` (synthetic backend) and `sidecar/` (sidecar backend).
/// Without shot.json the directory is scanned for `<stem>.<NNNN>.p[gp]m` files.
struct Shot {
    std::string id;
    int frame_count = 0;
    int width = 0;
    int height = 0;
    std::filesystem::path dir;
    std::string frame_pattern;

    static Shot open(const std::filesystem::path& dir);
    std::filesystem::path frame_path(int frame) const;
    Image read_frame(int frame) const;
    FrameSize size() const { return {width, height}; }
    std::filesystem::path scene_path() const { return dir / "scene.json"; }
    std::filesystem::path sidecar_dir() const;
};

void write_shot_metadata(const Shot& shot);

/// Writes a renderable synthetic shot (metadata, scene spec, frames).
Shot generate_synthetic_shot(const SceneSpec& spec, const std::filesystem::path& dir);

/// Detector, segmenter and tracker for a shot, already adapted to the working
/// resolution chosen by resize_policy.
struct BackendSet {
    std::shared_ptr<const Detector> detector;
    std::shared_ptr<const PromptableSegmenter> segmenter;
    std::shared_ptr<const VideoTracker> tracker;
    FrameSize native;
    FrameSize working;
};

BackendSet make_backends(const Shot& shot, const PipelineConfig& config);

/// Wraps native-resolution backends so that callers work at `working` size.
BackendSet scale_backends(std::shared_ptr<const Detector> detector,
                          std::shared_ptr<const PromptableSegmenter> segmenter,
                          std::shared_ptr<const VideoTracker> tracker, FrameSize native, FrameSize working);

/// Per-frame failures collected by the fail-soft stages.
struct StageStatus {
    std::vector<std::pair<int, std::string>> failures;
    std::vector<std::string> warnings;
    bool ok() const { return failures.empty(); }
};

/// Runs `fn(i)` for i in [0, count) on up to `workers` threads (0 = hardware).
/// Exceptions are returned per index instead of propagating.
std::vector<std::optional<std::string>> parallel_for(int count, int workers, const std::function<void(int)>& fn);

DetectionsDocument run_stage1(const Shot& shot, const PipelineConfig& config, const Detector& detector,
                              StageStatus& status);

struct Stage2Frame {
    FrameLayers layers;
    PostprocessReport report;
};

struct Stage2Archive {
    FrameSize size;
    std::map<int, Stage2Frame> frames;

    std::map<int, FrameLayers> layers() const;
};

/// Segments a frame's detections, binarizes, drops empties and post-processes.
Stage2Frame segment_frame(int frame, const std::vector<Detection>& detections, const PipelineConfig& config,
                          const PromptableSegmenter& segmenter);

Stage2Archive run_stage2(const Shot& shot, const DetectionsDocument& detections, const PipelineConfig& config,
                         const PromptableSegmenter& segmenter, StageStatus& status);

TrackingState run_stage3(const Shot& shot, const std::map<int, FrameLayers>& stage2, const PipelineConfig& config,
                         const VideoTracker& tracker, FrameSize working, const ProgressFn& progress = {},
                         std::vector<int> keyframes = {});

// On-disk stage artifacts.
void write_stage1(const std::filesystem::path& work, const DetectionsDocument& doc);
DetectionsDocument read_stage1(const std::filesystem::path& work);
void write_stage2(const std::filesystem::path& work, const Stage2Archive& archive);
Stage2Archive read_stage2(const std::filesystem::path& work);
void write_stage3(const std::filesystem::path& work, const TrackingState& state);
TrackingState read_stage3(const std::filesystem::path& work);

std::vector<std::uint8_t> encode_cache_frame(const CacheFrame& frame);
CacheFrame decode_cache_frame(std::span<const std::uint8_t> bytes);

/// Shot path and configuration shared by the chained stage commands.
struct RunInfo {
    std::filesystem::path shot;
    PipelineConfig config;
};
void write_run_info(const std::filesystem::path& work, const RunInfo& info);
RunInfo read_run_info(const std::filesystem::path& work);

enum class ExportFormat { ObjectId, PgmSequence };
ExportFormat parse_export_format(const std::string& name);

/// Cache frame resampled (nearest) to the shot's native resolution.
CacheFrame upsample_cache_frame(const CacheFrame& frame, FrameSize native);

/// ObjectId frames at native resolution, one per shot frame.
std::vector<ObjectIdFrame> objectid_frames(const TrackingState& state, FrameSize native, double tau);

struct ExportResult {
    std::vector<std::filesystem::path> files;
    std::vector<std::string> warnings;
};

/// Writes `<out>/<shot>.<NNNN>.oid` or `<out>/<label>_<id>.<NNNN>.pgm`;
/// with a filter also `<out>/matte.<NNNN>.pgm` (16-bit).
ExportResult export_results(const Shot& shot, const TrackingState& state, const PipelineConfig& config,
                            ExportFormat format, const std::optional<std::string>& filter,
                            const std::filesystem::path& out);

}  // namespace maskpipe
