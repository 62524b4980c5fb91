// Copyright 2026 The maskpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "maskpipe/service.hpp"

#include "httplib.h"
#include "json.hpp"

#include <boost/beast/core/detail/base64.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <mutex>
#include <thread>

namespace maskpipe {

using nlohmann::json;
namespace fs = std::filesystem;
namespace b64 = boost::beast::detail::base64;

const char* to_string(JobState state)
{
    switch (state) {
    case JobState::Queued: return "queued";
    case JobState::Running: return "running";
    case JobState::Done: return "done";
    case JobState::Failed: return "failed";
    }
    return "unknown";
}

namespace {

// Maps onto an HTTP status with an {"error": ...} body.
struct HttpError : std::runtime_error {
    int status;
    HttpError(int s, const std::string& what) : std::runtime_error(what), status(s) {}
};

std::string base64_encode(std::span<const std::uint8_t> bytes)
{
    std::string out(b64::encoded_size(bytes.size()), '\0');
    out.resize(b64::encode(out.data(), bytes.data(), bytes.size()));
    return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text)
{
    std::vector<std::uint8_t> out(b64::decoded_size(text.size()));
    const auto [written, read] = b64::decode(out.data(), text.data(), text.size());
    // The decoder stops at padding; anything after it must be padding too.
    const auto tail = text.find_first_not_of('=', read);
    if (tail != std::string::npos || text.size() - read > 2) {
        throw HttpError(422, "invalid base64 payload");
    }
    out.resize(written);
    return out;
}

json mask_payload(const BinaryMask& mask)
{
    const auto bytes = encode_pnm(mask_to_image(mask));
    return {{"format", "pgm"}, {"data", base64_encode(bytes)}, {"width", mask.width()},
            {"height", mask.height()}, {"area", area(mask)}};
}

BinaryMask decode_mask_payload(const json& j)
{
    const auto format = j.value("format", std::string("pgm"));
    if (format != "pgm") {
        throw HttpError(422, "unsupported mask format '" + format + "'");
    }
    try {
        return image_to_mask(decode_pnm(base64_decode(j.at("data").get<std::string>())));
    } catch (const ImageError& e) {
        throw HttpError(422, std::string("bad mask image: ") + e.what());
    }
}

json detection_json(const Detection& d)
{
    return {{"bbox", {d.bbox.x0, d.bbox.y0, d.bbox.x1, d.bbox.y1}}, {"score", d.score}, {"label", d.label}};
}

json report_json(const PostprocessReport& report)
{
    json out = json::array();
    for (const auto& e : report.events) {
        json overlaps = json::array();
        for (const auto& [k, v] : e.overlaps) {
            overlaps.push_back({k, v});
        }
        json je{{"kind", to_string(e.kind)}, {"key", e.key}, {"overlaps", overlaps}};
        if (e.kind == PostprocessEvent::Kind::Merge) {
            je["into"] = e.into;
        }
        out.push_back(std::move(je));
    }
    return out;
}

Image to_8bit(Image img)
{
    if (img.maxval == 255) {
        return img;
    }
    for (auto& s : img.samples) {
        s = static_cast<std::uint16_t>(std::lround(s * 255.0 / img.maxval));
    }
    img.maxval = 255;
    return img;
}

// Stable per-layer tint, independent of frame content.
std::array<int, 3> layer_color(std::uint32_t id)
{
    std::uint32_t h = id * 2654435761u;
    h ^= h >> 15;
    return {64 + static_cast<int>(h & 0xbf), 64 + static_cast<int>((h >> 8) & 0xbf),
            64 + static_cast<int>((h >> 16) & 0xbf)};
}

Image overlay(const Image& frame, const ObjectIdFrame& oid)
{
    Image out(frame.width, frame.height, 3, 255);
    const Image src = to_8bit(frame);
    for (std::size_t i = 0; i < oid.pixels.size(); ++i) {
        std::array<int, 3> base{};
        for (int c = 0; c < 3; ++c) {
            base[static_cast<std::size_t>(c)] = src.samples[i * static_cast<std::size_t>(src.channels) +
                                                            static_cast<std::size_t>(src.channels == 3 ? c : 0)];
        }
        const auto& samples = oid.pixels[i];
        if (!samples.empty()) {
            const auto top = std::max_element(samples.begin(), samples.end(),
                                              [](const IdSample& a, const IdSample& b) { return a.alpha < b.alpha; });
            const auto color = layer_color(top->id);
            for (std::size_t c = 0; c < 3; ++c) {
                base[c] = (base[c] + color[c]) / 2;
            }
        }
        for (std::size_t c = 0; c < 3; ++c) {
            out.samples[i * 3 + c] = static_cast<std::uint16_t>(base[c]);
        }
    }
    return out;
}

std::string body_text(const std::vector<std::uint8_t>& bytes)
{
    return std::string(bytes.begin(), bytes.end());
}

Point parse_point(const json& p)
{
    if (!p.is_array() || p.size() != 2) {
        throw HttpError(422, "points must be [x, y] pairs");
    }
    return Point{p.at(0).get<int>(), p.at(1).get<int>()};
}

struct Job {
    JobStatus status;
    std::vector<ObjectIdFrame> result;
};

struct TrackRequest {
    std::map<int, std::vector<Layer>> prompts;
    bool augment = false;
    bool prompts_only = false;
    PipelineConfig config;
};

}  // namespace

struct Service::Impl {
    ServiceOptions options;
    std::map<std::string, Shot> shots;
    httplib::Server server;

    mutable std::mutex mutex;
    std::condition_variable idle;
    std::map<std::string, std::shared_ptr<Job>> jobs;
    std::map<std::string, std::string> active_by_shot;
    std::vector<std::thread> workers;
    int next_job = 1;
    int running = 0;

    explicit Impl(ServiceOptions opts) : options(std::move(opts))
    {
        options.config.validate();
        if (!options.shots_dir.empty()) {
            if (!fs::is_directory(options.shots_dir)) {
                throw std::runtime_error("shots directory not found: " + options.shots_dir.string());
            }
            for (const auto& entry : fs::directory_iterator(options.shots_dir)) {
                if (!entry.is_directory()) {
                    continue;
                }
                try {
                    auto shot = Shot::open(entry.path());
                    shots.emplace(shot.id, std::move(shot));
                } catch (const std::exception&) {
                    // Not a shot; ignore.
                }
            }
        }
        routes();
    }

    ~Impl()
    {
        server.stop();
        for (auto& t : workers) {
            if (t.joinable()) {
                t.join();
            }
        }
    }

    const Shot& shot(const std::string& id) const
    {
        auto it = shots.find(id);
        if (it == shots.end()) {
            throw HttpError(404, "unknown shot '" + id + "'");
        }
        return it->second;
    }

    static json parse_body(const httplib::Request& req)
    {
        try {
            auto j = json::parse(req.body);
            if (!j.is_object()) {
                throw HttpError(400, "request body must be a JSON object");
            }
            return j;
        } catch (const json::parse_error& e) {
            throw HttpError(400, std::string("invalid JSON: ") + e.what());
        }
    }

    static int frame_arg(const Shot& s, const std::string& text)
    {
        int n = -1;
        try {
            std::size_t used = 0;
            n = std::stoi(text, &used);
            if (used != text.size()) {
                n = -1;
            }
        } catch (const std::exception&) {
            n = -1;
        }
        if (n < 0 || n >= s.frame_count) {
            throw HttpError(404, "frame " + text + " out of range");
        }
        return n;
    }

    // Previews run at native resolution so that coordinates match the frames served.
    BackendSet native_backends(const Shot& s) const
    {
        PipelineConfig cfg = options.config;
        cfg.max_dim = std::max({cfg.max_dim, s.width, s.height});
        return make_backends(s, cfg);
    }

    static void reply(httplib::Response& res, int status, const json& body)
    {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    template <typename Fn>
    httplib::Server::Handler guarded(Fn fn)
    {
        return [fn](const httplib::Request& req, httplib::Response& res) {
            try {
                fn(req, res);
            } catch (const HttpError& e) {
                reply(res, e.status, {{"error", e.what()}});
            } catch (const json::exception& e) {
                reply(res, 422, {{"error", std::string("bad request field: ") + e.what()}});
            } catch (const std::invalid_argument& e) {
                reply(res, 422, {{"error", e.what()}});
            } catch (const std::exception& e) {
                reply(res, 500, {{"error", e.what()}});
            }
        };
    }

    void routes()
    {
        server.Get("/api/shots", guarded([this](const httplib::Request&, httplib::Response& res) {
            json list = json::array();
            for (const auto& [id, s] : shots) {
                list.push_back(shot_json(s));
            }
            reply(res, 200, {{"shots", list}});
        }));
        server.Get(R"(/api/shots/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            reply(res, 200, shot_json(shot(req.matches[1])));
        }));
        server.Get(R"(/api/shots/([^/]+)/frames/([^/]+))",
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       const auto& s = shot(req.matches[1]);
                       const int n = frame_arg(s, req.matches[2]);
                       const Image img = to_8bit(s.read_frame(n));
                       res.set_content(body_text(encode_pnm(img)),
                                       img.channels == 3 ? "image/x-portable-pixmap" : "image/x-portable-graymap");
                   }));
        server.Post("/api/detect", guarded([this](const httplib::Request& req, httplib::Response& res) {
            detect(parse_body(req), res);
        }));
        server.Post("/api/segment-points", guarded([this](const httplib::Request& req, httplib::Response& res) {
            segment_points(parse_body(req), res);
        }));
        server.Post("/api/jobs/track", guarded([this](const httplib::Request& req, httplib::Response& res) {
            submit(parse_body(req), res);
        }));
        server.Get(R"(/api/jobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const auto st = status(req.matches[1]);
            if (!st) {
                throw HttpError(404, "unknown job '" + std::string(req.matches[1]) + "'");
            }
            reply(res, 200, status_json(*st));
        }));
        server.Get(R"(/api/jobs/([^/]+)/frames/([^/]+))",
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       job_frame(req.matches[1], req.matches[2], req.get_param_value("format"), res);
                   }));
        if (options.static_dir) {
            server.set_mount_point("/", options.static_dir->string());
        }
    }

    static json shot_json(const Shot& s)
    {
        return {{"id", s.id}, {"frames", s.frame_count}, {"width", s.width}, {"height", s.height}};
    }

    static json status_json(const JobStatus& st)
    {
        json j{{"id", st.id}, {"kind", "track"}, {"shot", st.shot}, {"state", to_string(st.state)},
               {"progress", st.progress}};
        j["error"] = st.error ? json(*st.error) : json(nullptr);
        return j;
    }

    void detect(const json& body, httplib::Response& res) const
    {
        const auto& s = shot(body.at("shot").get<std::string>());
        const int frame = body.at("frame").get<int>();
        if (frame < 0 || frame >= s.frame_count) {
            throw HttpError(404, "frame " + std::to_string(frame) + " out of range");
        }
        const auto prompt = body.value("prompt", std::string());
        if (split_prompt(prompt).empty()) {
            throw HttpError(422, "prompt is empty");
        }
        const auto backends = native_backends(s);
        PipelineConfig cfg = options.config;
        cfg.prompt = prompt;
        const auto detections = backends.detector->detect(frame, prompt);
        const auto result = segment_frame(frame, detections, cfg, *backends.segmenter);

        json dets = json::array();
        for (std::size_t k = 0; k < detections.size(); ++k) {
            auto d = detection_json(detections[k]);
            d["key"] = k;
            dets.push_back(std::move(d));
        }
        json previews = json::array();
        for (const auto& l : result.layers.layers) {
            auto p = mask_payload(l.mask);
            p["key"] = l.key;
            p["label"] = l.label;
            previews.push_back(std::move(p));
        }
        reply(res, 200, {{"frame", frame}, {"detections", dets}, {"preview_masks", previews},
                         {"report", report_json(result.report)}});
    }

    void segment_points(const json& body, httplib::Response& res) const
    {
        const auto& s = shot(body.at("shot").get<std::string>());
        const int frame = body.at("frame").get<int>();
        if (frame < 0 || frame >= s.frame_count) {
            throw HttpError(404, "frame " + std::to_string(frame) + " out of range");
        }
        const auto& layers = body.at("layers");
        if (!layers.is_array() || layers.empty()) {
            throw HttpError(422, "no layers given");
        }
        const auto backends = native_backends(s);
        json masks = json::array();
        for (std::size_t i = 0; i < layers.size(); ++i) {
            std::vector<Point> pos;
            std::vector<Point> neg;
            for (const auto& p : layers[i].value("positive", json::array())) {
                pos.push_back(parse_point(p));
            }
            for (const auto& p : layers[i].value("negative", json::array())) {
                neg.push_back(parse_point(p));
            }
            if (pos.empty()) {
                throw HttpError(422, "layer " + std::to_string(i) + " has no positive points");
            }
            for (const auto& p : pos) {
                check_point(s, p);
            }
            for (const auto& p : neg) {
                check_point(s, p);
            }
            const auto pm = backends.segmenter->segment_points(frame, pos, neg);
            auto payload = mask_payload(binarize(pm, options.config.binarize_tau));
            payload["layer"] = i;
            masks.push_back(std::move(payload));
        }
        reply(res, 200, {{"frame", frame}, {"masks", masks}});
    }

    static void check_point(const Shot& s, const Point& p)
    {
        if (p.x < 0 || p.y < 0 || p.x >= s.width || p.y >= s.height) {
            throw HttpError(422, "point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                                     ") outside the frame");
        }
    }

    TrackRequest parse_track(const Shot& s, const json& body) const
    {
        TrackRequest req;
        req.config = options.config;
        if (body.contains("config")) {
            for (const auto& [key, value] : body.at("config").items()) {
                req.config.set(key, value.is_string() ? value.get<std::string>() : value.dump());
            }
            req.config.validate();
        }
        const auto mode = body.value("mode", std::string("replace"));
        if (mode == "augment") {
            req.augment = true;
        } else if (mode == "prompts_only") {
            req.prompts_only = true;
        } else if (mode != "replace") {
            throw HttpError(422, "mode must be replace, augment or prompts_only");
        }
        const auto label = split_prompt(req.config.prompt).empty() ? std::string("object")
                                                                   : split_prompt(req.config.prompt).front();
        for (const auto& entry : body.value("prompt_masks", json::array())) {
            const int frame = entry.at("frame").get<int>();
            if (frame < 0 || frame >= s.frame_count) {
                throw HttpError(422, "prompt frame " + std::to_string(frame) + " out of range");
            }
            auto& layers = req.prompts[frame];
            for (const auto& jl : entry.at("layers")) {
                auto mask = decode_mask_payload(jl);
                if (mask.width() != s.width || mask.height() != s.height) {
                    throw HttpError(422, "prompt mask size does not match the shot");
                }
                layers.push_back(Layer{0, std::move(mask), jl.value("label", label)});
            }
        }
        if (req.prompts_only && req.prompts.empty()) {
            throw HttpError(422, "prompts_only job without prompt masks");
        }
        return req;
    }

    void submit(const json& body, httplib::Response& res)
    {
        const auto& s = shot(body.at("shot").get<std::string>());
        auto req = parse_track(s, body);
        std::lock_guard lock(mutex);
        if (active_by_shot.count(s.id) != 0) {
            throw HttpError(409, "shot '" + s.id + "' already has a running job " + active_by_shot[s.id]);
        }
        auto job = std::make_shared<Job>();
        job->status.id = "job-" + std::to_string(next_job++);
        job->status.shot = s.id;
        jobs.emplace(job->status.id, job);
        active_by_shot.emplace(s.id, job->status.id);
        ++running;
        workers.emplace_back([this, job, &s, req = std::move(req)] { execute(*job, s, req); });
        reply(res, 202, {{"job_id", job->status.id}});
    }

    void execute(Job& job, const Shot& s, const TrackRequest& req)
    {
        auto update = [&](auto fn) {
            std::lock_guard lock(mutex);
            fn(job.status);
        };
        update([](JobStatus& st) { st.state = JobState::Running; });
        try {
            const auto backends = make_backends(s, req.config);
            std::map<int, FrameLayers> stage2;
            if (!req.prompts_only) {
                StageStatus st;
                const auto doc = run_stage1(s, req.config, *backends.detector, st);
                stage2 = run_stage2(s, doc, req.config, *backends.segmenter, st).layers();
            }
            std::vector<int> keyframes;
            for (const auto& [frame, layers] : req.prompts) {
                keyframes.push_back(frame);
                auto& target = stage2[frame];
                target.frame_index = frame;
                if (!req.augment) {
                    target.layers.clear();
                }
                LayerKey key = 0;
                for (const auto& l : target.layers) {
                    key = std::max(key, l.key + 1);
                }
                for (const auto& l : layers) {
                    target.layers.push_back(Layer{key++,
                                                  resample_nearest(l.mask, backends.working.width,
                                                                   backends.working.height),
                                                  l.label});
                }
            }
            const auto state = run_stage3(
                s, stage2, req.config, *backends.tracker, backends.working,
                [&](int done, int total) {
                    update([&](JobStatus& js) {
                        js.progress = std::max(js.progress, total > 0 ? static_cast<double>(done) / total : 1.0);
                    });
                },
                keyframes);
            auto frames = objectid_frames(state, s.size(), req.config.binarize_tau);
            finish(job, s, [&](Job& j) {
                j.result = std::move(frames);
                j.status.progress = 1.0;
                j.status.state = JobState::Done;
            });
        } catch (const std::exception& e) {
            finish(job, s, [&](Job& j) {
                j.status.state = JobState::Failed;
                j.status.error = e.what();
            });
        }
    }

    // The final state and the release of the shot become visible together.
    template <typename Fn>
    void finish(Job& job, const Shot& s, Fn fn)
    {
        std::lock_guard lock(mutex);
        fn(job);
        active_by_shot.erase(s.id);
        --running;
        idle.notify_all();
    }

    std::optional<JobStatus> status(const std::string& id) const
    {
        std::lock_guard lock(mutex);
        auto it = jobs.find(id);
        if (it == jobs.end()) {
            return std::nullopt;
        }
        return it->second->status;
    }

    void job_frame(const std::string& id, const std::string& frame_text, const std::string& format,
                   httplib::Response& res) const
    {
        std::shared_ptr<Job> job;
        {
            std::lock_guard lock(mutex);
            auto it = jobs.find(id);
            if (it == jobs.end()) {
                throw HttpError(404, "unknown job '" + id + "'");
            }
            if (it->second->status.state != JobState::Done) {
                throw HttpError(409, "job '" + id + "' is " + to_string(it->second->status.state));
            }
            job = it->second;
        }
        const auto& s = shot(job->status.shot);
        const int n = frame_arg(s, frame_text);
        const auto& oid = job->result.at(static_cast<std::size_t>(n));
        if (format.empty() || format == "oid") {
            res.set_content(body_text(encode(oid)), "application/octet-stream");
        } else if (format == "overlay") {
            res.set_content(body_text(encode_pnm(overlay(s.read_frame(n), oid))), "image/x-portable-pixmap");
        } else {
            throw HttpError(422, "format must be oid or overlay");
        }
    }
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

Service::~Service() = default;

std::vector<std::string> Service::shot_ids() const
{
    std::vector<std::string> ids;
    for (const auto& [id, s] : impl_->shots) {
        ids.push_back(id);
    }
    return ids;
}

int Service::bind(const std::string& host, int port)
{
    if (port == 0) {
        const int bound = impl_->server.bind_to_any_port(host);
        if (bound < 0) {
            throw std::runtime_error("could not bind " + host);
        }
        return bound;
    }
    if (!impl_->server.bind_to_port(host, port)) {
        throw std::runtime_error("could not bind " + host + ":" + std::to_string(port));
    }
    return port;
}

void Service::serve()
{
    impl_->server.listen_after_bind();
}

void Service::stop()
{
    impl_->server.stop();
}

std::optional<JobStatus> Service::job(const std::string& id) const
{
    return impl_->status(id);
}

void Service::wait_for_jobs()
{
    std::unique_lock lock(impl_->mutex);
    impl_->idle.wait(lock, [this] { return impl_->running == 0; });
}

}  // namespace maskpipe
