// Copyright 2026 The maskpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "maskpipe/config.hpp"
#include "maskpipe/pipeline.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace maskpipe {

struct ServiceOptions {
    /// Every subdirectory that opens as a Shot is registered under its id.
    std::filesystem::path shots_dir;
    /// Served under `/` when set (web UI assets).
    std::optional<std::filesystem::path> static_dir;
    /// Base configuration; jobs may override individual keys.
    PipelineConfig config;
};

enum class JobState { Queued, Running, Done, Failed };
const char* to_string(JobState state);

struct JobStatus {
    std::string id;
    std::string shot;
    JobState state = JobState::Queued;
    double progress = 0.0;
    std::optional<std::string> error;
};

/// HTTP/1.1 JSON facade over the pipeline. One worker thread per job and at
/// most one queued or running job per shot.
///
///   GET  /api/shots, /api/shots/{id}, /api/shots/{id}/frames/{n}
///   POST /api/detect, /api/segment-points, /api/jobs/track
///   GET  /api/jobs/{id}, /api/jobs/{id}/frames/{n}?format=oid|overlay
class Service {
public:
    explicit Service(ServiceOptions options);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    std::vector<std::string> shot_ids() const;

    /// Binds to `port` (0 picks a free one) and returns the bound port.
    int bind(const std::string& host, int port);
    /// Serves until stop(); call after bind().
    void serve();
    void stop();

    std::optional<JobStatus> job(const std::string& id) const;
    /// Blocks until every submitted job has finished.
    void wait_for_jobs();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace maskpipe
