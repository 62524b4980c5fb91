// Copyright 2026 The maskpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "maskpipe/pipeline.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <regex>
#include <set>
#include <thread>

namespace maskpipe {

using nlohmann::json;
namespace fs = std::filesystem;

FrameSize resize_policy(int width, int height, int max_dim)
{
    if (width < 1 || height < 1) {
        throw std::invalid_argument("resize_policy: dimensions must be positive");
    }
    const int longest = std::max(width, height);
    if (longest <= max_dim) {
        return {width, height};
    }
    const double scale = static_cast<double>(max_dim) / static_cast<double>(longest);
    return {std::max(1, static_cast<int>(std::lround(width * scale))),
            std::max(1, static_cast<int>(std::lround(height * scale)))};
}

// ---------------------------------------------------------------------------
// Shot

namespace {

std::string format_pattern(const std::string& pattern, int frame)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, pattern.c_str(), frame);
    return buf;
}

Shot scan_shot(const fs::path& dir)
{
    static const std::regex kFrameFile(R"((.+)\.(\d{4,})\.(pgm|ppm))");
    std::map<std::pair<std::string, std::string>, std::set<int>> groups;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) {
            continue;
        }
        std::smatch m;
        const std::string name = entry.path().filename().string();
        if (std::regex_match(name, m, kFrameFile)) {
            groups[{m[1].str(), m[3].str()}].insert(std::stoi(m[2].str()));
        }
    }
    if (groups.empty()) {
        throw std::runtime_error("shot: " + dir.string() + " has no shot.json and no numbered frames");
    }
    const auto& [key, frames] = *groups.begin();
    if (*frames.begin() != 0 || *frames.rbegin() != static_cast<int>(frames.size()) - 1) {
        throw std::runtime_error("shot: frame numbers in " + dir.string() + " are not contiguous from 0");
    }
    Shot shot;
    shot.dir = dir;
    shot.id = dir.filename().string();
    shot.frame_count = static_cast<int>(frames.size());
    shot.frame_pattern = key.first + ".%04d." + key.second;
    const Image first = shot.read_frame(0);
    shot.width = first.width;
    shot.height = first.height;
    return shot;
}

}  // namespace

Shot Shot::open(const fs::path& dir)
{
    if (!fs::is_directory(dir)) {
        throw std::runtime_error("shot: not a directory: " + dir.string());
    }
    const auto meta = dir / "shot.json";
    if (!fs::exists(meta)) {
        return scan_shot(dir);
    }
    Shot shot;
    shot.dir = dir;
    try {
        const json j = json::parse(read_text(meta));
        shot.id = j.value("id", dir.filename().string());
        shot.frame_count = j.at("frames").get<int>();
        shot.width = j.at("width").get<int>();
        shot.height = j.at("height").get<int>();
        shot.frame_pattern = j.value("frame_pattern", std::string("frames/frame.%04d.ppm"));
    } catch (const json::exception& e) {
        throw std::runtime_error("shot: malformed " + meta.string() + ": " + e.what());
    }
    if (shot.frame_count < 1 || shot.width < 1 || shot.height < 1) {
        throw std::runtime_error("shot: invalid metadata in " + meta.string());
    }
    return shot;
}

fs::path Shot::frame_path(int frame) const
{
    if (frame < 0 || frame >= frame_count) {
        throw std::out_of_range("shot: frame " + std::to_string(frame) + " out of range");
    }
    return dir / format_pattern(frame_pattern, frame);
}

Image Shot::read_frame(int frame) const
{
    return read_pnm(frame_path(frame));
}

fs::path Shot::sidecar_dir() const
{
    const auto sub = dir / "sidecar";
    return fs::is_directory(sub) ? sub : dir;
}

void write_shot_metadata(const Shot& shot)
{
    const json j{{"id", shot.id}, {"frames", shot.frame_count}, {"width", shot.width}, {"height", shot.height},
                 {"frame_pattern", shot.frame_pattern}};
    write_text(shot.dir / "shot.json", j.dump(2) + "\n");
}

Shot generate_synthetic_shot(const SceneSpec& spec, const fs::path& dir)
{
    const SyntheticScene scene(spec);
    fs::create_directories(dir);
    Shot shot;
    shot.id = spec.id;
    shot.frame_count = spec.frame_count;
    shot.width = spec.width;
    shot.height = spec.height;
    shot.dir = dir;
    shot.frame_pattern = "frames/frame.%04d.ppm";
    write_shot_metadata(shot);
    write_text(dir / "scene.json", scene_spec_to_json(spec));
    for (int f = 0; f < spec.frame_count; ++f) {
        write_pnm(shot.frame_path(f), scene.render(f));
    }
    return shot;
}

// ---------------------------------------------------------------------------
// Backends

namespace {

Box scale_box(const Box& b, double sx, double sy)
{
    return Box{b.x0 * sx, b.y0 * sy, b.x1 * sx, b.y1 * sy};
}

Point scale_point(const Point& p, FrameSize from, FrameSize to)
{
    const auto map = [](int v, int a, int b) {
        return std::min(b - 1, static_cast<int>(std::floor((v + 0.5) * b / static_cast<double>(a))));
    };
    return Point{map(p.x, from.width, to.width), map(p.y, from.height, to.height)};
}

class ScaledDetector final : public Detector {
public:
    ScaledDetector(std::shared_ptr<const Detector> inner, FrameSize native, FrameSize working)
        : inner_(std::move(inner)), native_(native), working_(working)
    {}
    FrameSize frame_size() const override { return working_; }
    std::vector<Detection> detect(int frame, std::string_view prompt) const override
    {
        auto dets = inner_->detect(frame, prompt);
        const double sx = static_cast<double>(working_.width) / native_.width;
        const double sy = static_cast<double>(working_.height) / native_.height;
        for (auto& d : dets) {
            d.bbox = scale_box(d.bbox, sx, sy);
        }
        return dets;
    }

private:
    std::shared_ptr<const Detector> inner_;
    FrameSize native_, working_;
};

class ScaledSegmenter final : public PromptableSegmenter {
public:
    ScaledSegmenter(std::shared_ptr<const PromptableSegmenter> inner, FrameSize native, FrameSize working)
        : inner_(std::move(inner)), native_(native), working_(working)
    {}
    FrameSize frame_size() const override { return working_; }
    ProbMask segment_box(int frame, const Box& box) const override
    {
        const double sx = static_cast<double>(native_.width) / working_.width;
        const double sy = static_cast<double>(native_.height) / working_.height;
        return resample_nearest(inner_->segment_box(frame, scale_box(box, sx, sy)), working_.width,
                                working_.height);
    }
    ProbMask segment_points(int frame, std::span<const Point> positive,
                            std::span<const Point> negative) const override
    {
        std::vector<Point> pos;
        std::vector<Point> neg;
        for (const auto& p : positive) {
            pos.push_back(scale_point(p, working_, native_));
        }
        for (const auto& p : negative) {
            neg.push_back(scale_point(p, working_, native_));
        }
        return resample_nearest(inner_->segment_points(frame, pos, neg), working_.width, working_.height);
    }

private:
    std::shared_ptr<const PromptableSegmenter> inner_;
    FrameSize native_, working_;
};

class ScaledTracker final : public VideoTracker {
public:
    ScaledTracker(std::shared_ptr<const VideoTracker> inner, FrameSize native, FrameSize working)
        : inner_(std::move(inner)), native_(native), working_(working)
    {}
    FrameSize frame_size() const override { return working_; }
    std::vector<TrackerPrediction> track(std::span<const int> frames,
                                         const std::map<LayerId, BinaryMask>& prompt) const override
    {
        std::map<LayerId, BinaryMask> up;
        for (const auto& [id, m] : prompt) {
            up.emplace(id, resample_nearest(m, native_.width, native_.height));
        }
        auto preds = inner_->track(frames, up);
        for (auto& p : preds) {
            for (auto& [id, pm] : p.per_layer) {
                pm = resample_nearest(pm, working_.width, working_.height);
            }
        }
        return preds;
    }

private:
    std::shared_ptr<const VideoTracker> inner_;
    FrameSize native_, working_;
};

}  // namespace

BackendSet scale_backends(std::shared_ptr<const Detector> detector,
                          std::shared_ptr<const PromptableSegmenter> segmenter,
                          std::shared_ptr<const VideoTracker> tracker, FrameSize native, FrameSize working)
{
    if (native == working) {
        return {std::move(detector), std::move(segmenter), std::move(tracker), native, working};
    }
    return {std::make_shared<ScaledDetector>(std::move(detector), native, working),
            std::make_shared<ScaledSegmenter>(std::move(segmenter), native, working),
            std::make_shared<ScaledTracker>(std::move(tracker), native, working), native, working};
}

BackendSet make_backends(const Shot& shot, const PipelineConfig& config)
{
    const FrameSize native = shot.size();
    const FrameSize working = resize_policy(native.width, native.height, config.max_dim);
    if (config.backend == BackendKind::Synthetic) {
        if (!fs::exists(shot.scene_path())) {
            throw std::runtime_error("synthetic backend: " + shot.scene_path().string() + " not found");
        }
        SceneSpec spec = parse_scene_spec(read_text(shot.scene_path()));
        if (config.seed) {
            spec.seed = *config.seed;
        }
        if (spec.width != native.width || spec.height != native.height || spec.frame_count != shot.frame_count) {
            throw std::runtime_error("synthetic backend: scene does not match shot metadata");
        }
        auto scene = std::make_shared<const SyntheticScene>(std::move(spec));
        return scale_backends(scene, scene, scene, native, working);
    }
    auto sidecar = SidecarBackend::load(shot.sidecar_dir(), native);
    auto tracker = std::make_shared<const IdentityTracker>(native);
    return scale_backends(sidecar, sidecar, tracker, native, working);
}

// ---------------------------------------------------------------------------
// Stages

std::vector<std::optional<std::string>> parallel_for(int count, int workers, const std::function<void(int)>& fn)
{
    std::vector<std::optional<std::string>> errors(static_cast<std::size_t>(std::max(0, count)));
    if (count <= 0) {
        return errors;
    }
    int n = workers > 0 ? workers : static_cast<int>(std::thread::hardware_concurrency());
    n = std::clamp(n, 1, count);
    std::atomic<int> next{0};
    auto body = [&] {
        for (int i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (const std::exception& e) {
                errors[static_cast<std::size_t>(i)] = e.what();
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = "unknown error";
            }
        }
    };
    if (n == 1) {
        body();
        return errors;
    }
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) {
        pool.emplace_back(body);
    }
    pool.clear();
    return errors;
}

DetectionsDocument run_stage1(const Shot& shot, const PipelineConfig& config, const Detector& detector,
                              StageStatus& status)
{
    config.validate();
    std::vector<std::vector<Detection>> per_frame(static_cast<std::size_t>(shot.frame_count));
    const auto errors = parallel_for(shot.frame_count, config.workers, [&](int f) {
        per_frame[static_cast<std::size_t>(f)] = detector.detect(f, config.prompt);
    });
    DetectionsDocument doc;
    for (int f = 0; f < shot.frame_count; ++f) {
        if (errors[static_cast<std::size_t>(f)]) {
            status.failures.emplace_back(f, *errors[static_cast<std::size_t>(f)]);
            continue;
        }
        doc[f] = std::move(per_frame[static_cast<std::size_t>(f)]);
    }
    return doc;
}

std::map<int, FrameLayers> Stage2Archive::layers() const
{
    std::map<int, FrameLayers> out;
    for (const auto& [f, s] : frames) {
        out.emplace(f, s.layers);
    }
    return out;
}

Stage2Frame segment_frame(int frame, const std::vector<Detection>& detections, const PipelineConfig& config,
                          const PromptableSegmenter& segmenter)
{
    FrameLayers raw{frame, {}};
    for (std::size_t k = 0; k < detections.size(); ++k) {
        const auto pm = segmenter.segment_box(frame, detections[k].bbox);
        raw.layers.push_back(Layer{static_cast<LayerKey>(k), binarize(pm, config.binarize_tau), detections[k].label});
    }
    auto [layers, report] = postprocess_frame(raw, config.postprocess());
    return Stage2Frame{std::move(layers), std::move(report)};
}

Stage2Archive run_stage2(const Shot& shot, const DetectionsDocument& detections, const PipelineConfig& config,
                         const PromptableSegmenter& segmenter, StageStatus& status)
{
    config.validate();
    Stage2Archive archive;
    archive.size = segmenter.frame_size();
    std::vector<Stage2Frame> per_frame(static_cast<std::size_t>(shot.frame_count));
    static const std::vector<Detection> kNone;
    for (int f = 0; f < shot.frame_count; ++f) {
        if (detections.count(f) == 0) {
            status.warnings.push_back("stage 2: no detections for frame " + std::to_string(f));
        }
    }
    const auto errors = parallel_for(shot.frame_count, config.workers, [&](int f) {
        auto it = detections.find(f);
        per_frame[static_cast<std::size_t>(f)] =
            segment_frame(f, it == detections.end() ? kNone : it->second, config, segmenter);
    });
    for (int f = 0; f < shot.frame_count; ++f) {
        if (errors[static_cast<std::size_t>(f)]) {
            status.failures.emplace_back(f, *errors[static_cast<std::size_t>(f)]);
            continue;
        }
        archive.frames.emplace(f, std::move(per_frame[static_cast<std::size_t>(f)]));
    }
    return archive;
}

TrackingState run_stage3(const Shot& shot, const std::map<int, FrameLayers>& stage2, const PipelineConfig& config,
                         const VideoTracker& tracker, FrameSize working, const ProgressFn& progress,
                         std::vector<int> keyframes)
{
    config.validate();
    auto params = config.tracking();
    params.keyframes = std::move(keyframes);
    return track_shot(shot.frame_count, working, stage2, tracker, params, true, progress);
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr const char* kStage2Dir = "stage2";
constexpr const char* kStage3Dir = "stage3";

std::string layer_file(int frame, LayerKey key)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "layer.%04d.%02u.pgm", frame, static_cast<unsigned>(key));
    return buf;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
    }
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at)
{
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(b[at + static_cast<std::size_t>(i)]) << (8 * i);
    }
    return v;
}

PostprocessEvent::Kind parse_event_kind(const std::string& s)
{
    if (s == "drop_empty") {
        return PostprocessEvent::Kind::DropEmpty;
    }
    if (s == "merge") {
        return PostprocessEvent::Kind::Merge;
    }
    if (s == "discard") {
        return PostprocessEvent::Kind::Discard;
    }
    throw std::runtime_error("stage2: unknown report event '" + s + "'");
}

}  // namespace

void write_stage1(const fs::path& work, const DetectionsDocument& doc)
{
    write_text(work / kDetectionsFile, detections_to_json(doc));
}

DetectionsDocument read_stage1(const fs::path& work)
{
    const auto path = work / kDetectionsFile;
    if (!fs::exists(path)) {
        throw std::runtime_error("stage 1 output not found: " + path.string());
    }
    return parse_detections(read_text(path));
}

void write_stage2(const fs::path& work, const Stage2Archive& archive)
{
    const auto dir = work / kStage2Dir;
    fs::create_directories(dir);
    json frames = json::array();
    for (const auto& [f, s] : archive.frames) {
        json layers = json::array();
        for (const auto& l : s.layers.layers) {
            const auto name = layer_file(f, l.key);
            write_pnm(dir / name, mask_to_image(l.mask));
            layers.push_back({{"key", l.key}, {"label", l.label}, {"mask", name}});
        }
        json report = json::array();
        for (const auto& e : s.report.events) {
            json overlaps = json::array();
            for (const auto& [k, v] : e.overlaps) {
                overlaps.push_back({k, v});
            }
            json je{{"kind", to_string(e.kind)}, {"key", e.key}, {"overlaps", overlaps}};
            if (e.kind == PostprocessEvent::Kind::Merge) {
                je["into"] = e.into;
            }
            report.push_back(je);
        }
        frames.push_back({{"index", f}, {"layers", layers}, {"report", report}});
    }
    const json j{{"width", archive.size.width}, {"height", archive.size.height}, {"frames", frames}};
    write_text(dir / "layers.json", j.dump(2) + "\n");
}

Stage2Archive read_stage2(const fs::path& work)
{
    const auto dir = work / kStage2Dir;
    const auto path = dir / "layers.json";
    if (!fs::exists(path)) {
        throw std::runtime_error("stage 2 output not found: " + path.string());
    }
    Stage2Archive archive;
    try {
        const json j = json::parse(read_text(path));
        archive.size = FrameSize{j.at("width").get<int>(), j.at("height").get<int>()};
        for (const auto& jf : j.at("frames")) {
            const int f = jf.at("index").get<int>();
            Stage2Frame s;
            s.layers.frame_index = f;
            for (const auto& jl : jf.at("layers")) {
                auto mask = image_to_mask(read_pnm(dir / jl.at("mask").get<std::string>()));
                if (mask.width() != archive.size.width || mask.height() != archive.size.height) {
                    throw std::runtime_error("stage2: mask dimensions differ from archive");
                }
                s.layers.layers.push_back(
                    Layer{jl.at("key").get<LayerKey>(), std::move(mask), jl.at("label").get<std::string>()});
            }
            for (const auto& je : jf.value("report", json::array())) {
                PostprocessEvent e;
                e.kind = parse_event_kind(je.at("kind").get<std::string>());
                e.key = je.at("key").get<LayerKey>();
                e.into = je.value("into", LayerKey{0});
                for (const auto& o : je.at("overlaps")) {
                    e.overlaps.emplace_back(o.at(0).get<LayerKey>(), o.at(1).get<double>());
                }
                s.report.events.push_back(std::move(e));
            }
            archive.frames.emplace(f, std::move(s));
        }
    } catch (const json::exception& e) {
        throw std::runtime_error("stage2: malformed " + path.string() + ": " + e.what());
    }
    return archive;
}

std::vector<std::uint8_t> encode_cache_frame(const CacheFrame& frame)
{
    std::vector<std::uint8_t> out{'M', 'P', 'C', '1'};
    put_u32(out, static_cast<std::uint32_t>(frame.width()));
    put_u32(out, static_cast<std::uint32_t>(frame.height()));
    out.reserve(out.size() + frame.ids.size() * 8);
    for (auto id : frame.ids.data()) {
        put_u32(out, id);
    }
    for (auto p : frame.probs.data()) {
        std::uint32_t bits = 0;
        std::memcpy(&bits, &p, sizeof bits);
        put_u32(out, bits);
    }
    return out;
}

CacheFrame decode_cache_frame(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "MPC1", 4) != 0) {
        throw std::runtime_error("cache frame: bad header");
    }
    const auto w = get_u32(bytes, 4);
    const auto h = get_u32(bytes, 8);
    const std::size_t n = static_cast<std::size_t>(w) * h;
    if (w == 0 || h == 0 || bytes.size() != 12 + n * 8) {
        throw std::runtime_error("cache frame: size mismatch");
    }
    CacheFrame frame(static_cast<int>(w), static_cast<int>(h));
    for (std::size_t i = 0; i < n; ++i) {
        frame.ids[i] = get_u32(bytes, 12 + 4 * i);
        const std::uint32_t bits = get_u32(bytes, 12 + 4 * n + 4 * i);
        std::memcpy(&frame.probs[i], &bits, sizeof bits);
    }
    return frame;
}

void write_stage3(const fs::path& work, const TrackingState& state)
{
    const auto dir = work / kStage3Dir;
    fs::create_directories(dir);
    json layers = json::array();
    for (const auto& [id, info] : state.registry.entries()) {
        layers.push_back({{"id", id}, {"label", info.label}, {"first_seen_frame", info.first_seen_frame}});
    }
    const int w = state.cache.frames.empty() ? 0 : state.cache.frames.front().width();
    const int h = state.cache.frames.empty() ? 0 : state.cache.frames.front().height();
    const json j{{"width", w},
                 {"height", h},
                 {"frames", state.cache.frame_count()},
                 {"next_id", state.registry.next_id()},
                 {"layers", layers}};
    write_text(dir / "registry.json", j.dump(2) + "\n");
    for (int f = 0; f < state.cache.frame_count(); ++f) {
        write_file(dir / frame_name("cache", f, "mpc"), encode_cache_frame(state.cache.frames[static_cast<std::size_t>(f)]));
    }
}

TrackingState read_stage3(const fs::path& work)
{
    const auto dir = work / kStage3Dir;
    const auto path = dir / "registry.json";
    if (!fs::exists(path)) {
        throw std::runtime_error("stage 3 output not found: " + path.string());
    }
    TrackingState state;
    try {
        const json j = json::parse(read_text(path));
        std::map<LayerId, LayerInfo> entries;
        for (const auto& l : j.at("layers")) {
            entries.emplace(l.at("id").get<LayerId>(),
                            LayerInfo{l.at("label").get<std::string>(), l.at("first_seen_frame").get<int>()});
        }
        state.registry = LayerRegistry::restore(j.at("next_id").get<LayerId>(), std::move(entries));
        const int frames = j.at("frames").get<int>();
        for (int f = 0; f < frames; ++f) {
            state.cache.frames.push_back(decode_cache_frame(read_file(dir / frame_name("cache", f, "mpc"))));
        }
    } catch (const json::exception& e) {
        throw std::runtime_error("stage3: malformed " + path.string() + ": " + e.what());
    }
    return state;
}

void write_run_info(const fs::path& work, const RunInfo& info)
{
    const json j{{"shot", info.shot.string()}, {"config", config_to_text(info.config)}};
    write_text(work / "run.json", j.dump(2) + "\n");
}

RunInfo read_run_info(const fs::path& work)
{
    const auto path = work / "run.json";
    if (!fs::exists(path)) {
        throw std::runtime_error("run info not found: " + path.string());
    }
    try {
        const json j = json::parse(read_text(path));
        return RunInfo{fs::path(j.at("shot").get<std::string>()), parse_config(j.at("config").get<std::string>())};
    } catch (const json::exception& e) {
        throw std::runtime_error("malformed " + path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Export

ExportFormat parse_export_format(const std::string& name)
{
    if (name == "oid") {
        return ExportFormat::ObjectId;
    }
    if (name == "pgm") {
        return ExportFormat::PgmSequence;
    }
    throw std::invalid_argument("unknown export format '" + name + "' (expected oid or pgm)");
}

CacheFrame upsample_cache_frame(const CacheFrame& frame, FrameSize native)
{
    if (frame.width() == native.width && frame.height() == native.height) {
        return frame;
    }
    CacheFrame out;
    out.ids = resample_nearest(frame.ids, native.width, native.height);
    out.probs = resample_nearest(frame.probs, native.width, native.height);
    return out;
}

std::vector<ObjectIdFrame> objectid_frames(const TrackingState& state, FrameSize native, double tau)
{
    const auto manifest = build_manifest(state.cache, state.registry, tau);
    std::vector<ObjectIdFrame> out;
    out.reserve(state.cache.frames.size());
    for (const auto& frame : state.cache.frames) {
        out.push_back(from_tracking(upsample_cache_frame(frame, native), manifest, tau));
    }
    return out;
}

ExportResult export_results(const Shot& shot, const TrackingState& state, const PipelineConfig& config,
                            ExportFormat format, const std::optional<std::string>& filter, const fs::path& out)
{
    ExportResult result;
    fs::create_directories(out);
    const double tau = config.binarize_tau;
    const auto oids = objectid_frames(state, shot.size(), tau);
    std::set<std::string> seen_warnings;
    for (std::size_t f = 0; f < oids.size(); ++f) {
        const int frame = static_cast<int>(f);
        if (format == ExportFormat::ObjectId) {
            const auto path = out / frame_name(shot.id, frame, "oid");
            write_file(path, encode(oids[f]));
            result.files.push_back(path);
        } else {
            const auto up = upsample_cache_frame(state.cache.frames[f], shot.size());
            for (const auto& [id, info] : state.registry.entries()) {
                BinaryMask m(up.width(), up.height(), 0);
                for (std::size_t i = 0; i < m.size(); ++i) {
                    m[i] = up.ids[i] == id && static_cast<double>(up.probs[i]) >= tau ? 1 : 0;
                }
                const auto path = out / frame_name(info.label + "_" + std::to_string(id), frame, "pgm");
                write_pnm(path, mask_to_image(m));
                result.files.push_back(path);
            }
        }
        if (filter) {
            auto matte = filter_matte(oids[f], *filter);
            for (auto& w : matte.warnings) {
                if (seen_warnings.insert(w).second) {
                    result.warnings.push_back(w);
                }
            }
            const auto path = out / frame_name("matte", frame, "pgm");
            write_pnm(path, matte_to_image16(matte.matte));
            result.files.push_back(path);
        }
    }
    return result;
}

}  // namespace maskpipe
