// Copyright 2026 The maskpipe Authors
// SPDX-License-Identifier: Apache-2.0

// maskpipe: command-line driver for the segmentation pipeline.
//
// Exit codes: 0 success, 1 finished with per-frame failures, 2 fatal error.

#include "maskpipe/pipeline.hpp"
#include "maskpipe/service.hpp"

#include "CLI11.hpp"

#include <csignal>
#include <iostream>

namespace fs = std::filesystem;
using namespace maskpipe;

namespace {

constexpr int kOk = 0;
constexpr int kPartial = 1;
constexpr int kFatal = 2;

struct ConfigArgs {
    std::string file;
    std::vector<std::string> sets;
    std::string prompt;
    std::optional<std::uint64_t> seed;
    std::string backend;

    void add_to(CLI::App* app)
    {
        app->add_option("--config", file, "key = value configuration file")->check(CLI::ExistingFile);
        app->add_option("--set", sets, "Override one setting, KEY=VALUE (repeatable)");
        app->add_option("--prompt", prompt, "Detection prompt, comma-separated classes");
        app->add_option("--seed", seed, "Synthetic backend seed");
        app->add_option("--backend", backend, "Model backend")->check(CLI::IsMember({"synthetic", "sidecar"}));
    }

    PipelineConfig build() const
    {
        PipelineConfig config;
        if (!file.empty()) {
            config = parse_config(read_text(file));
        }
        for (const auto& kv : sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) {
                throw std::invalid_argument("--set expects KEY=VALUE, got '" + kv + "'");
            }
            config.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (!prompt.empty()) {
            config.prompt = prompt;
        }
        if (seed) {
            config.seed = seed;
        }
        if (!backend.empty()) {
            config.backend = parse_backend(backend);
        }
        config.validate();
        return config;
    }
};

struct ExportArgs {
    std::string format = "oid";
    std::optional<std::string> filter;

    void add_to(CLI::App* app)
    {
        app->add_option("--format", format, "Export format")->check(CLI::IsMember({"oid", "pgm"}));
        app->add_option("--filter", filter, "Name pattern for an extracted matte (* and ? wildcards)");
    }
};

int report(const char* stage, const StageStatus& status)
{
    for (const auto& w : status.warnings) {
        std::cerr << stage << ": warning: " << w << "\n";
    }
    for (const auto& [frame, what] : status.failures) {
        std::cerr << stage << ": frame " << frame << " failed: " << what << "\n";
    }
    return status.ok() ? kOk : kPartial;
}

ProgressFn progress_printer(bool verbose)
{
    if (!verbose) {
        return {};
    }
    return [](int done, int total) { std::cerr << "track: " << done << "/" << total << "\n"; };
}

void print_export(const ExportResult& result)
{
    for (const auto& w : result.warnings) {
        std::cerr << "export: warning: " << w << "\n";
    }
    std::cout << "wrote " << result.files.size() << " files\n";
}

int cmd_run(const std::string& shot_dir, const ConfigArgs& cfg, const ExportArgs& ex, const std::string& work,
            const std::string& out, bool verbose)
{
    const auto config = cfg.build();
    const auto shot = Shot::open(shot_dir);
    const auto format = parse_export_format(ex.format);
    const auto backends = make_backends(shot, config);

    StageStatus s1;
    const auto doc = run_stage1(shot, config, *backends.detector, s1);
    StageStatus s2;
    const auto archive = run_stage2(shot, doc, config, *backends.segmenter, s2);
    const auto state =
        run_stage3(shot, archive.layers(), config, *backends.tracker, backends.working, progress_printer(verbose));
    if (!work.empty()) {
        write_run_info(work, RunInfo{fs::absolute(shot_dir), config});
        write_stage1(work, doc);
        write_stage2(work, archive);
        write_stage3(work, state);
    }
    print_export(export_results(shot, state, config, format, ex.filter, out));
    return std::max(report("detect", s1), report("segment", s2));
}

int cmd_detect(const std::string& shot_dir, const ConfigArgs& cfg, const std::string& work)
{
    const auto config = cfg.build();
    const auto shot = Shot::open(shot_dir);
    const auto backends = make_backends(shot, config);
    StageStatus status;
    const auto doc = run_stage1(shot, config, *backends.detector, status);
    write_run_info(work, RunInfo{fs::absolute(shot_dir), config});
    write_stage1(work, doc);
    return report("detect", status);
}

int cmd_segment(const std::string& in, const std::string& out)
{
    const auto info = read_run_info(in);
    const auto shot = Shot::open(info.shot);
    const auto backends = make_backends(shot, info.config);
    StageStatus status;
    const auto archive = run_stage2(shot, read_stage1(in), info.config, *backends.segmenter, status);
    write_run_info(out, info);
    write_stage2(out, archive);
    return report("segment", status);
}

int cmd_track(const std::string& in, const std::string& out, bool verbose)
{
    const auto info = read_run_info(in);
    const auto shot = Shot::open(info.shot);
    const auto backends = make_backends(shot, info.config);
    const auto archive = read_stage2(in);
    if (archive.size != backends.working) {
        throw std::runtime_error("stage 2 artifacts do not match the working resolution");
    }
    const auto state = run_stage3(shot, archive.layers(), info.config, *backends.tracker, backends.working,
                                  progress_printer(verbose));
    write_run_info(out, info);
    write_stage3(out, state);
    return kOk;
}

int cmd_export(const std::string& work, const ExportArgs& ex, const std::string& out)
{
    const auto info = read_run_info(work);
    const auto shot = Shot::open(info.shot);
    print_export(export_results(shot, read_stage3(work), info.config, parse_export_format(ex.format), ex.filter, out));
    return kOk;
}

int cmd_matte(const std::string& file, const std::string& filter, const std::string& out)
{
    const auto frame = decode(read_file(file));
    const auto result = filter_matte(frame, filter);
    for (const auto& w : result.warnings) {
        std::cerr << "matte: warning: " << w << "\n";
    }
    write_pnm(out, matte_to_image16(result.matte));
    return kOk;
}

int cmd_scene_gen(const std::string& spec_file, const std::string& out)
{
    const auto shot = generate_synthetic_shot(parse_scene_spec(read_text(spec_file)), out);
    std::cout << "generated shot " << shot.id << ": " << shot.frame_count << " frames " << shot.width << "x"
              << shot.height << "\n";
    return kOk;
}

Service* g_service = nullptr;

void on_signal(int)
{
    if (g_service != nullptr) {
        g_service->stop();
    }
}

int cmd_serve(int port, const std::string& host, const std::string& shots, const std::string& static_dir,
              const ConfigArgs& cfg)
{
    ServiceOptions options;
    options.shots_dir = shots;
    if (!static_dir.empty()) {
        options.static_dir = fs::path(static_dir);
    }
    options.config = cfg.build();
    Service service(std::move(options));
    const int bound = service.bind(host, port);
    std::cout << "serving " << service.shot_ids().size() << " shots on http://" << host << ":" << bound << "\n"
              << std::flush;
    g_service = &service;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    service.serve();
    g_service = nullptr;
    return kOk;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"maskpipe: automatic video segmentation pipeline"};
    app.require_subcommand(1);

    std::string shot_dir, in, out, work, file, filter, spec, shots, static_dir, host = "127.0.0.1";
    int port = 8080;
    bool verbose = false;
    ConfigArgs cfg;
    ExportArgs ex;

    auto* run = app.add_subcommand("run", "Run detect, segment, track and export in one go");
    run->add_option("--shot", shot_dir, "Shot directory")->required()->check(CLI::ExistingDirectory);
    run->add_option("--out", out, "Export directory")->required();
    run->add_option("--work", work, "Also keep stage artifacts here");
    run->add_flag("-v,--verbose", verbose, "Print tracking progress");
    cfg.add_to(run);
    ex.add_to(run);

    auto* detect = app.add_subcommand("detect", "Stage 1: per-frame detection");
    detect->add_option("--in", in, "Shot directory")->required()->check(CLI::ExistingDirectory);
    detect->add_option("--out", out, "Work directory for stage artifacts")->required();
    cfg.add_to(detect);

    auto* segment = app.add_subcommand("segment", "Stage 2: segmentation and post-processing");
    segment->add_option("--in", in, "Work directory holding stage 1 output")->required()->check(CLI::ExistingDirectory);
    segment->add_option("--out", out, "Work directory for stage 2 output (default: --in)");

    auto* track = app.add_subcommand("track", "Stage 3: bidirectional tracking");
    track->add_option("--in", in, "Work directory holding stage 2 output")->required()->check(CLI::ExistingDirectory);
    track->add_option("--out", out, "Work directory for stage 3 output (default: --in)");
    track->add_flag("-v,--verbose", verbose, "Print tracking progress");

    auto* exp = app.add_subcommand("export", "Write ObjectId or per-layer mask sequences");
    exp->add_option("--in", in, "Work directory holding stage 3 output")->required()->check(CLI::ExistingDirectory);
    exp->add_option("--out", out, "Export directory")->required();
    ex.add_to(exp);

    auto* matte = app.add_subcommand("matte", "Extract a 16-bit matte from an .oid file");
    matte->add_option("file", file, "ObjectId file")->required()->check(CLI::ExistingFile);
    matte->add_option("--filter", filter, "Name pattern (* and ? wildcards)")->required();
    matte->add_option("--out", out, "Output .pgm")->required();

    auto* scene = app.add_subcommand("scene-gen", "Render a synthetic shot from a scene spec");
    scene->add_option("--spec", spec, "Scene JSON")->required()->check(CLI::ExistingFile);
    scene->add_option("--out", out, "Shot directory to create")->required();

    auto* serve = app.add_subcommand("serve", "Start the HTTP service");
    serve->add_option("--port", port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--shots", shots, "Directory of shot directories")->required()->check(CLI::ExistingDirectory);
    serve->add_option("--static", static_dir, "Web UI assets")->check(CLI::ExistingDirectory);
    cfg.add_to(serve);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kFatal;
    }

    const auto out_or_in = [&] { return out.empty() ? in : out; };
    try {
        if (*run) {
            return cmd_run(shot_dir, cfg, ex, work, out, verbose);
        }
        if (*detect) {
            return cmd_detect(in, cfg, out);
        }
        if (*segment) {
            return cmd_segment(in, out_or_in());
        }
        if (*track) {
            return cmd_track(in, out_or_in(), verbose);
        }
        if (*exp) {
            return cmd_export(in, ex, out);
        }
        if (*matte) {
            return cmd_matte(file, filter, out);
        }
        if (*scene) {
            return cmd_scene_gen(spec, out);
        }
        if (*serve) {
            return cmd_serve(port, host, shots, static_dir, cfg);
        }
    } catch (const std::exception& e) {
        std::cerr << "maskpipe: " << e.what() << "\n";
        return kFatal;
    }
    return kFatal;
}
