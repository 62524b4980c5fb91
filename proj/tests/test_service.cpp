// Copyright 2026 The maskpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "maskpipe/pipeline.hpp"
#include "maskpipe/service.hpp"

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "support/oracles.hpp"

#include <boost/beast/core/detail/base64.hpp>

#include <chrono>
#include <thread>

using namespace maskpipe;
using namespace maskpipe::testing;
using nlohmann::json;
namespace b64 = boost::beast::detail::base64;

namespace {

SceneSpec pair_spec()
{
    SceneSpec s;
    s.id = "pair";
    s.width = 64;
    s.height = 48;
    s.frame_count = 6;
    s.seed = 9;
    s.noise.merged_false_positive_rate = 1.0;
    s.objects.push_back(moving_rect("person", 0, {0, 20, 24, 16, 30}, {5, 22, 24, 16, 30}));
    s.objects.push_back(moving_rect("person", 0, {0, 32, 26, 16, 30}, {5, 34, 26, 16, 30}));
    return s;
}

SceneSpec armed_spec()
{
    SceneSpec s;
    s.id = "armed";
    s.width = 60;
    s.height = 60;
    s.frame_count = 2;
    SceneObject person = moving_rect("person", 0, {0, 30, 30, 12, 30}, {0, 30, 30, 12, 30});
    person.parts.push_back(ObjectPart{"arm", ShapeKind::Rectangle, 12, -5, 14, 4});
    s.objects.push_back(person);
    return s;
}

SceneSpec walkers_spec()
{
    SceneSpec s;
    s.id = "walkers";
    s.width = 96;
    s.height = 64;
    s.frame_count = 16;
    s.seed = 4;
    s.objects.push_back(moving_rect("person", 0, {0, 20, 32, 14, 40}, {15, 44, 30, 14, 40}));
    s.objects.push_back(moving_rect("person", 0, {0, 76, 32, 14, 40}, {15, 70, 34, 14, 40}));
    return s;
}

// Long enough that a second submission arrives while the first job runs.
SceneSpec long_spec()
{
    auto s = crossing_scene(240, 3, NoiseProfile{0.05, 0.1, 0.1, 1, 0.01});
    s.id = "long";
    return s;
}

std::string base64(const std::vector<std::uint8_t>& bytes)
{
    std::string out(b64::encoded_size(bytes.size()), '\0');
    out.resize(b64::encode(out.data(), bytes.data(), bytes.size()));
    return out;
}

BinaryMask unbase64_mask(const json& payload)
{
    const auto text = payload.at("data").get<std::string>();
    std::vector<std::uint8_t> bytes(b64::decoded_size(text.size()));
    bytes.resize(b64::decode(bytes.data(), text.data(), text.size()).first);
    return image_to_mask(decode_pnm(bytes));
}

json mask_json(const BinaryMask& m)
{
    return {{"format", "pgm"}, {"data", base64(encode_pnm(mask_to_image(m)))}};
}

struct Server {
    TempDir dir{"service"};
    std::unique_ptr<Service> service;
    std::thread thread;
    int port = 0;

    Server()
    {
        for (const auto& spec : {pair_spec(), armed_spec(), walkers_spec(), long_spec()}) {
            generate_synthetic_shot(spec, dir / spec.id);
        }
        std::filesystem::create_directories(dir / "not-a-shot");
        service = std::make_unique<Service>(ServiceOptions{dir.path(), std::nullopt, PipelineConfig{}});
        port = service->bind("127.0.0.1", 0);
        thread = std::thread([this] { service->serve(); });
    }
    ~Server()
    {
        service->wait_for_jobs();
        service->stop();
        thread.join();
    }

    httplib::Client client() const
    {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(60, 0);
        return c;
    }
};

Server& server()
{
    static Server s;
    return s;
}

json post(const std::string& path, const json& body, int expect)
{
    auto res = server().client().Post(path, body.dump(), "application/json");
    REQUIRE(res);
    CHECK_MESSAGE(res->status == expect, res->body);
    return json::parse(res->body);
}

json get(const std::string& path, int expect)
{
    auto res = server().client().Get(path);
    REQUIRE(res);
    CHECK_MESSAGE(res->status == expect, res->body);
    return json::parse(res->body);
}

json wait_done(const std::string& job, std::vector<double>* progress = nullptr)
{
    for (;;) {
        auto st = get("/api/jobs/" + job, 200);
        if (progress) {
            progress->push_back(st.at("progress").get<double>());
        }
        const auto state = st.at("state").get<std::string>();
        if (state == "done" || state == "failed") {
            return st;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
}

std::vector<std::uint8_t> job_frame(const std::string& job, int frame, const std::string& format = "oid")
{
    auto res = server().client().Get("/api/jobs/" + job + "/frames/" + std::to_string(frame) + "?format=" + format);
    REQUIRE(res);
    REQUIRE(res->status == 200);
    return {res->body.begin(), res->body.end()};
}

}  // namespace

TEST_CASE("service lists shots")
{
    CHECK(server().service->shot_ids() == std::vector<std::string>{"armed", "long", "pair", "walkers"});
    const auto list = get("/api/shots", 200);
    REQUIRE(list.at("shots").size() == 4);
    const auto pair = get("/api/shots/pair", 200);
    CHECK(pair.at("frames") == 6);
    CHECK(pair.at("width") == 64);
    CHECK(pair.at("height") == 48);
    CHECK(get("/api/shots/nope", 404).contains("error"));
}

TEST_CASE("service serves frames")
{
    auto res = server().client().Get("/api/shots/pair/frames/5");
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto img = decode_pnm(std::vector<std::uint8_t>(res->body.begin(), res->body.end()));
    CHECK(img.width == 64);
    CHECK(img.height == 48);
    CHECK(get("/api/shots/pair/frames/6", 404).contains("error"));
    CHECK(get("/api/shots/pair/frames/x", 404).contains("error"));
}

TEST_CASE("detect returns boxes, previews and the post-processing report")
{
    const SyntheticScene scene(pair_spec());
    const auto r = post("/api/detect", {{"shot", "pair"}, {"frame", 2}, {"prompt", "person"}}, 200);
    const auto& dets = r.at("detections");
    REQUIRE(dets.size() == 3);
    const auto gt = bounding_box(scene.object_mask(2, 0));
    CHECK(dets[0].at("bbox") == json{gt.x0, gt.y0, gt.x1, gt.y1});
    CHECK(dets[0].at("score") == 1.0);
    CHECK(dets[2].at("score") == 0.5);
    const auto& report = r.at("report");
    REQUIRE(report.size() == 1);
    CHECK(report[0].at("kind") == "discard");
    CHECK(report[0].at("key") == 2);
    CHECK(report[0].at("overlaps").size() == 2);
    const auto& previews = r.at("preview_masks");
    REQUIRE(previews.size() == 2);
    CHECK(unbase64_mask(previews[0]) == scene.object_mask(2, 0));
    CHECK(unbase64_mask(previews[1]) == scene.object_mask(2, 1));
    CHECK(previews[1].at("area") == area(scene.object_mask(2, 1)));

    const auto none = post("/api/detect", {{"shot", "pair"}, {"frame", 0}, {"prompt", "xyzzy"}}, 200);
    CHECK(none.at("detections").empty());
    CHECK(none.at("preview_masks").empty());

    post("/api/detect", {{"shot", "pair"}, {"frame", 0}, {"prompt", " , "}}, 422);
    post("/api/detect", {{"shot", "pair"}, {"frame", 9}, {"prompt", "person"}}, 404);
    post("/api/detect", {{"shot", "nope"}, {"frame", 0}, {"prompt", "person"}}, 404);
    post("/api/detect", {{"frame", 0}}, 422);
    auto bad = server().client().Post("/api/detect", "{oops", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);
}

TEST_CASE("segment-points refines with negative clicks")
{
    const SyntheticScene scene(armed_spec());
    const json pos = json::array({json::array({30, 30})});
    const auto full = post("/api/segment-points", {{"shot", "armed"}, {"frame", 0}, {"layers", {{{"positive", pos}}}}},
                           200);
    REQUIRE(full.at("masks").size() == 1);
    CHECK(unbase64_mask(full["masks"][0]) == scene.object_mask(0, 0));

    const json neg = json::array({json::array({40, 24})});
    const auto refined = post("/api/segment-points",
                              {{"shot", "armed"}, {"frame", 0}, {"layers", {{{"positive", pos}, {"negative", neg}}}}},
                              200);
    const auto m = unbase64_mask(refined["masks"][0]);
    CHECK(m == rect_mask(60, 60, 24, 15, 36, 45));
    CHECK(area(m) < area(scene.object_mask(0, 0)));

    post("/api/segment-points", {{"shot", "armed"}, {"frame", 0}, {"layers", json::array()}}, 422);
    post("/api/segment-points", {{"shot", "armed"}, {"frame", 0}, {"layers", {{{"positive", json::array()}}}}}, 422);
    post("/api/segment-points",
         {{"shot", "armed"}, {"frame", 0}, {"layers", {{{"positive", json::array({json::array({60, 3})})}}}}}, 422);
    post("/api/segment-points",
         {{"shot", "armed"}, {"frame", 0}, {"layers", {{{"positive", pos}, {"negative", json::array({json::array({-1, 3})})}}}}},
         422);
    post("/api/segment-points", {{"shot", "armed"}, {"frame", 0}, {"layers", {{{"positive", json::array({1})}}}}}, 422);
}

TEST_CASE("track job from keyframe masks")
{
    const SyntheticScene scene(walkers_spec());
    const json body{{"shot", "walkers"},
                    {"mode", "prompts_only"},
                    {"prompt_masks", {{{"frame", 0},
                                       {"layers", {mask_json(scene.object_mask(0, 0)), mask_json(scene.object_mask(0, 1))}}}}}};
    const auto job = post("/api/jobs/track", body, 202).at("job_id").get<std::string>();
    const auto st = wait_done(job);
    REQUIRE(st.at("state") == "done");
    CHECK(st.at("progress") == 1.0);
    CHECK(st.at("shot") == "walkers");
    CHECK(st.at("kind") == "track");
    CHECK(st.at("error").is_null());

    for (int f = 0; f < 16; ++f) {
        const auto oid = decode(job_frame(job, f));
        REQUIRE(oid.manifest.size() == 2);
        CHECK(oid.manifest.at(1) == "person:1");
        for (std::uint32_t id = 1; id <= 2; ++id) {
            BinaryMask m(96, 64, 0);
            for (std::size_t i = 0; i < oid.pixels.size(); ++i) {
                for (const auto& s : oid.pixels[i]) {
                    m[i] = m[i] || (s.id == id && s.alpha >= 0.5f) ? 1 : 0;
                }
            }
            CHECK(oracle_iou(m, scene.object_mask(f, static_cast<int>(id) - 1)) == 1.0);
        }
    }
    const auto overlay = decode_pnm(job_frame(job, 3, "overlay"));
    CHECK(overlay.channels == 3);
    CHECK(overlay.width == 96);
    CHECK(get("/api/jobs/" + job + "/frames/16", 404).contains("error"));
    CHECK(get("/api/jobs/" + job + "/frames/1?format=png", 422).contains("error"));
}

TEST_CASE("track job output matches the batch pipeline")
{
    const auto job = post("/api/jobs/track", {{"shot", "pair"}}, 202).at("job_id").get<std::string>();
    REQUIRE(wait_done(job).at("state") == "done");

    const auto shot = Shot::open(server().dir / "pair");
    const PipelineConfig config;
    const auto backends = make_backends(shot, config);
    StageStatus status;
    const auto s1 = run_stage1(shot, config, *backends.detector, status);
    const auto s2 = run_stage2(shot, s1, config, *backends.segmenter, status);
    const auto state = run_stage3(shot, s2.layers(), config, *backends.tracker, backends.working);
    const auto frames = objectid_frames(state, shot.size(), config.binarize_tau);
    for (int f = 0; f < shot.frame_count; ++f) {
        CHECK(job_frame(job, f) == encode(frames[static_cast<std::size_t>(f)]));
    }
}

TEST_CASE("one running job per shot with monotone progress")
{
    const auto job = post("/api/jobs/track", {{"shot", "long"}}, 202).at("job_id").get<std::string>();
    const auto second = post("/api/jobs/track", {{"shot", "long"}}, 409);
    CHECK(second.at("error").get<std::string>().find(job) != std::string::npos);
    CHECK(get("/api/jobs/" + job + "/frames/0", 409).contains("error"));

    std::vector<double> progress;
    const auto st = wait_done(job, &progress);
    CHECK(st.at("state") == "done");
    CHECK(std::is_sorted(progress.begin(), progress.end()));
    CHECK(progress.back() == 1.0);

    // The shot is free again once the job finished.
    const auto again = post("/api/jobs/track", {{"shot", "long"}, {"config", {{"s_P", "10"}}}}, 202);
    CHECK(wait_done(again.at("job_id")).at("state") == "done");
}

TEST_CASE("track job validation")
{
    const BinaryMask wrong(10, 10, 1);
    post("/api/jobs/track",
         {{"shot", "pair"}, {"prompt_masks", {{{"frame", 0}, {"layers", {mask_json(wrong)}}}}}}, 422);
    post("/api/jobs/track", {{"shot", "pair"}, {"mode", "prompts_only"}}, 422);
    post("/api/jobs/track", {{"shot", "pair"}, {"mode", "sideways"}}, 422);
    post("/api/jobs/track", {{"shot", "pair"}, {"config", {{"epsilon", "2"}}}}, 422);
    post("/api/jobs/track", {{"shot", "pair"}, {"config", {{"colour", "red"}}}}, 422);
    post("/api/jobs/track", {{"shot", "nope"}}, 404);
    post("/api/jobs/track",
         {{"shot", "pair"}, {"prompt_masks", {{{"frame", 0}, {"layers", {{{"format", "pgm"}, {"data", "!!"}}}}}}}}, 422);
    CHECK(get("/api/jobs/job-999", 404).contains("error"));
    CHECK(get("/api/jobs/job-999/frames/0", 404).contains("error"));
}

TEST_CASE("failed jobs report their error")
{
    const auto job = post("/api/jobs/track", {{"shot", "pair"}, {"config", {{"backend", "sidecar"}}}}, 202)
                         .at("job_id")
                         .get<std::string>();
    const auto st = wait_done(job);
    CHECK(st.at("state") == "failed");
    CHECK(st.at("error").get<std::string>().find("detections.json") != std::string::npos);
    const auto status = server().service->job(job);
    REQUIRE(status);
    CHECK(status->state == JobState::Failed);
}
