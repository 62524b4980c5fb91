// Copyright 2026 The maskpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "maskpipe/tracking.hpp"

#include "doctest.h"
#include "support/oracles.hpp"

#include <mutex>
#include <set>

using namespace maskpipe;
using namespace maskpipe::testing;

namespace {

LayerRegistry registry_with(int n)
{
    LayerRegistry r;
    for (int i = 0; i < n; ++i) {
        r.allocate("person", 0);
    }
    return r;
}

CacheFrame cache_with(int w, int h, std::initializer_list<std::tuple<LayerId, BinaryMask, float>> layers)
{
    CacheFrame f(w, h);
    for (const auto& [id, m, p] : layers) {
        for (std::size_t i = 0; i < m.size(); ++i) {
            if (m[i]) {
                f.ids[i] = id;
                f.probs[i] = p;
            }
        }
    }
    return f;
}

FrameLayers stage2_of(int frame, std::vector<BinaryMask> masks)
{
    FrameLayers f{frame, {}};
    for (std::size_t i = 0; i < masks.size(); ++i) {
        f.layers.push_back(Layer{static_cast<LayerKey>(i), std::move(masks[i]), "person"});
    }
    return f;
}

// Echoes the prompt and records every call.
class RecordingTracker final : public VideoTracker {
public:
    explicit RecordingTracker(FrameSize size, float conf = 0.95f) : size_(size), conf_(conf) {}
    FrameSize frame_size() const override { return size_; }
    std::vector<TrackerPrediction> track(std::span<const int> frames,
                                         const std::map<LayerId, BinaryMask>& prompt) const override
    {
        calls.emplace_back(frames.begin(), frames.end());
        prompts.push_back(prompt);
        std::vector<TrackerPrediction> out;
        for (int f : frames) {
            TrackerPrediction p{f, {}};
            for (const auto& [id, m] : prompt) {
                ProbMask pm(m.width(), m.height(), 0.0f);
                for (std::size_t i = 0; i < m.size(); ++i) {
                    pm[i] = m[i] ? conf_ : 0.0f;
                }
                p.per_layer.emplace(id, std::move(pm));
            }
            out.push_back(std::move(p));
        }
        return out;
    }
    mutable std::vector<std::vector<int>> calls;
    mutable std::vector<std::map<LayerId, BinaryMask>> prompts;

private:
    FrameSize size_;
    float conf_;
};

class FailingTracker final : public VideoTracker {
public:
    FrameSize frame_size() const override { return {8, 8}; }
    std::vector<TrackerPrediction> track(std::span<const int>, const std::map<LayerId, BinaryMask>&) const override
    {
        throw BackendError("model crashed");
    }
};

}  // namespace

TEST_CASE("empty cache frame stores the prediction verbatim")
{
    auto reg = registry_with(1);
    TrackerPrediction pred{0, {}};
    pred.per_layer.emplace(1, rect_prob(8, 8, 2, 2, 5, 5, 0.9f));
    const auto out = merge_prediction(CacheFrame(8, 8), pred, reg, 0.1);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
            const bool in = x >= 2 && x < 5 && y >= 2 && y < 5;
            CHECK(out.ids.at(x, y) == (in ? 1u : 0u));
            CHECK(out.probs.at(x, y) == (in ? 0.9f : 0.0f));
        }
    }
}

TEST_CASE("epsilon margin decides pixel updates")
{
    auto reg = registry_with(2);
    const auto cached = cache_with(4, 1, {{1, BinaryMask(4, 1, 1), 0.50f}});
    SUBCASE("0.59 does not beat 0.50")
    {
        TrackerPrediction pred{0, {}};
        pred.per_layer.emplace(2, ProbMask(4, 1, 0.59f));
        const auto out = merge_prediction(cached, pred, reg, 0.1);
        CHECK(out == cached);
    }
    SUBCASE("0.60 beats 0.50 at the boundary")
    {
        TrackerPrediction pred{0, {}};
        pred.per_layer.emplace(2, ProbMask(4, 1, 0.60f));
        const auto out = merge_prediction(cached, pred, reg, 0.1);
        CHECK(out.ids[0] == 2);
        CHECK(out.probs[0] == 0.60f);
    }
}

TEST_CASE("argmax ties go to the lowest layer id")
{
    auto reg = registry_with(3);
    TrackerPrediction pred{0, {}};
    pred.per_layer.emplace(3, ProbMask(2, 2, 0.7f));
    pred.per_layer.emplace(2, ProbMask(2, 2, 0.7f));
    const auto out = merge_prediction(CacheFrame(2, 2), pred, reg, 0.1);
    for (auto id : out.ids.data()) {
        CHECK(id == 2);
    }
}

TEST_CASE("merge_prediction rejects unknown ids and mismatched shapes")
{
    auto reg = registry_with(1);
    TrackerPrediction unknown{0, {}};
    unknown.per_layer.emplace(5, ProbMask(4, 4, 0.5f));
    CHECK_THROWS_AS(merge_prediction(CacheFrame(4, 4), unknown, reg, 0.1), std::invalid_argument);

    TrackerPrediction zero{0, {}};
    zero.per_layer.emplace(0, ProbMask(4, 4, 0.5f));
    CHECK_THROWS_AS(merge_prediction(CacheFrame(4, 4), zero, reg, 0.1), std::invalid_argument);

    TrackerPrediction wrong{0, {}};
    wrong.per_layer.emplace(1, ProbMask(5, 4, 0.5f));
    CHECK_THROWS_AS(merge_prediction(CacheFrame(4, 4), wrong, reg, 0.1), DimensionMismatch);
}

TEST_CASE("registry allocates monotonically and validates restores")
{
    LayerRegistry r;
    CHECK(r.allocate("person", 0) == 1);
    CHECK(r.allocate("car", 4) == 2);
    CHECK(r.at(2).label == "car");
    CHECK(r.at(2).first_seen_frame == 4);
    CHECK(r.next_id() == 3);
    CHECK_THROWS_AS(r.at(9), std::out_of_range);
    CHECK_THROWS_AS(LayerRegistry::restore(2, {{2, {"x", 0}}}), std::invalid_argument);
    CHECK_THROWS_AS(LayerRegistry::restore(2, {{0, {"x", 0}}}), std::invalid_argument);
    const auto restored = LayerRegistry::restore(5, {{1, {"person", 0}}, {3, {"person", 2}}});
    CHECK(restored.next_id() == 5);
}

TEST_CASE("build_prompt_mask: direct match")
{
    // 20 cached pixels; the stage-2 mask adds one: IoU 20/21 > 0.9.
    const auto cm = rect_mask(10, 10, 0, 0, 4, 5);
    auto s2 = cm;
    s2.at(4, 0) = 1;
    REQUIRE(oracle_iou(s2, cm) >= 0.95);
    auto reg = registry_with(3);
    const auto frame = cache_with(10, 10, {{3, cm, 0.9f}, {1, rect_mask(10, 10, 7, 7, 10, 10), 0.9f}});
    const auto built = build_prompt_mask(frame, stage2_of(5, {s2}), reg, TrackingParams{});
    REQUIRE(built.report.size() == 1);
    CHECK(built.report[0].kind == MatchKind::Direct);
    CHECK(built.report[0].layer == 3);
    CHECK(built.prompt.at(3) == or_masks(cm, s2));
    CHECK(built.registry == reg);
}

TEST_CASE("build_prompt_mask: cache holding only an arm is a partial match")
{
    const auto person = rect_mask(20, 20, 5, 2, 15, 18);
    // Arm: 20 pixels, 19 inside the person, so sim(arm, person) = 0.95.
    auto arm = rect_mask(20, 20, 6, 6, 10, 11);
    arm.at(6, 6) = 0;
    arm.at(4, 6) = 1;
    REQUIRE(oracle_sim(arm, person) == doctest::Approx(0.95));
    REQUIRE(oracle_iou(arm, person) < 0.9);
    auto reg = registry_with(1);
    const auto frame = cache_with(20, 20, {{1, arm, 0.8f}});
    const auto built = build_prompt_mask(frame, stage2_of(5, {person}), reg, TrackingParams{});
    REQUIRE(built.report.size() == 1);
    CHECK(built.report[0].kind == MatchKind::Partial);
    CHECK(built.report[0].layer == 1);
    CHECK(built.prompt.at(1) == or_masks(arm, person));
    CHECK(built.registry.next_id() == reg.next_id());
}

TEST_CASE("build_prompt_mask: mask overlapping two cache layers is dropped")
{
    const auto a = rect_mask(20, 10, 0, 0, 8, 10);
    const auto b = rect_mask(20, 10, 12, 0, 20, 10);
    const auto s2 = rect_mask(20, 10, 6, 0, 14, 10);
    auto reg = registry_with(2);
    const auto frame = cache_with(20, 10, {{1, a, 0.9f}, {2, b, 0.9f}});
    const auto built = build_prompt_mask(frame, stage2_of(0, {s2}), reg, TrackingParams{});
    REQUIRE(built.report.size() == 1);
    CHECK(built.report[0].kind == MatchKind::DroppedMultiple);
    CHECK(built.report[0].overlapping == std::vector<LayerId>{1, 2});
    CHECK(built.prompt.at(1) == a);
    CHECK(built.prompt.at(2) == b);
    CHECK(built.prompt.size() == 2);
}

TEST_CASE("build_prompt_mask: a single weak overlap is dropped")
{
    const auto a = rect_mask(20, 10, 0, 0, 10, 10);
    const auto s2 = rect_mask(20, 10, 7, 0, 17, 10);  // 30% either way
    auto reg = registry_with(1);
    const auto built =
        build_prompt_mask(cache_with(20, 10, {{1, a, 0.9f}}), stage2_of(0, {s2}), reg, TrackingParams{});
    CHECK(built.report[0].kind == MatchKind::DroppedWeak);
    CHECK(built.prompt.at(1) == a);
}

TEST_CASE("build_prompt_mask: unmatched mask gets a fresh id")
{
    auto reg = registry_with(2);
    const auto a = rect_mask(20, 10, 0, 0, 5, 5);
    const auto s2 = rect_mask(20, 10, 10, 0, 15, 5);
    const auto built = build_prompt_mask(cache_with(20, 10, {{1, a, 0.9f}}), stage2_of(7, {s2}), reg,
                                         TrackingParams{});
    CHECK(built.report[0].kind == MatchKind::NewLayer);
    CHECK(built.report[0].layer == 3);
    CHECK(built.registry.at(3).first_seen_frame == 7);
    CHECK(built.prompt.at(3) == s2);
}

TEST_CASE("build_prompt_mask: cache content is the template and low-prob pixels are excluded")
{
    auto reg = registry_with(1);
    auto frame = cache_with(10, 10, {{1, rect_mask(10, 10, 0, 0, 5, 5), 0.9f}});
    frame.probs.at(0, 0) = 0.3f;
    const auto built = build_prompt_mask(frame, FrameLayers{0, {}}, reg, TrackingParams{});
    auto expected = rect_mask(10, 10, 0, 0, 5, 5);
    expected.at(0, 0) = 0;
    CHECK(built.prompt.at(1) == expected);
}

TEST_CASE("build_prompt_mask: stage-2 identical to cache changes nothing")
{
    auto reg = registry_with(2);
    const auto a = rect_mask(20, 10, 0, 0, 6, 10);
    const auto b = rect_mask(20, 10, 10, 2, 18, 8);
    const auto frame = cache_with(20, 10, {{1, a, 0.9f}, {2, b, 0.7f}});
    const auto built = build_prompt_mask(frame, stage2_of(3, {b, a}), reg, TrackingParams{});
    CHECK(built.prompt == cache_layers(frame, 0.5));
    CHECK(built.registry == reg);
}

TEST_CASE("schedules and ranges")
{
    TrackingParams p;
    CHECK(forward_schedule(12, p) == std::vector<int>{0, 5, 10});
    CHECK(backward_schedule(12, p) == std::vector<int>{11, 6, 1});
    CHECK(forward_schedule(1, p) == std::vector<int>{0});
    p.keyframes = {3, 5, 40};
    CHECK(forward_schedule(12, p) == std::vector<int>{0, 3, 5, 10});
    CHECK(tracking_range(5, 12, 20, false) == std::vector<int>{5, 6, 7, 8, 9, 10, 11});
    CHECK(tracking_range(3, 12, 2, true) == std::vector<int>{3, 2, 1});
    CHECK(tracking_range(0, 100, 20, false).size() == 21);
}

TEST_CASE("params validation")
{
    TrackingParams p;
    p.prompt_step = 25;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = TrackingParams{};
    p.epsilon = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    CHECK_NOTHROW(TrackingParams{}.validate());
}

TEST_CASE("forward pass on twelve frames")
{
    const FrameSize size{16, 16};
    RecordingTracker tracker(size);
    std::map<int, FrameLayers> s2;
    for (int t = 0; t < 12; ++t) {
        s2[t] = stage2_of(t, {rect_mask(16, 16, 2, 2, 8, 8)});
    }
    TrackingParams params;
    const auto state =
        forward_pass(12, s2, tracker, params, TrackingState{MaskCache(12, 16, 16), {}});
    REQUIRE(tracker.calls.size() == 3);
    CHECK(tracker.calls[0].front() == 0);
    CHECK(tracker.calls[1].front() == 5);
    CHECK(tracker.calls[2].front() == 10);
    std::map<int, int> hits;
    for (const auto& c : tracker.calls) {
        CHECK(c.back() == 11);
        for (int f : c) {
            ++hits[f];
        }
    }
    for (int f = 5; f < 12; ++f) {
        CHECK(hits[f] >= 2);
    }
    CHECK(state.registry.entries().size() == 1);
}

TEST_CASE("single-frame shot equals the tracker's prediction of the stage-2 prompt")
{
    const FrameSize size{10, 10};
    RecordingTracker tracker(size, 0.8f);
    std::map<int, FrameLayers> s2{{0, stage2_of(0, {rect_mask(10, 10, 1, 1, 4, 4)})}};
    const auto fwd = track_shot(1, size, s2, tracker, TrackingParams{}, false);
    const auto expected = cache_with(10, 10, {{1, rect_mask(10, 10, 1, 1, 4, 4), 0.8f}});
    CHECK(fwd.cache.frames[0] == expected);
    const auto both = track_shot(1, size, s2, tracker, TrackingParams{}, true);
    CHECK(both == fwd);
}

TEST_CASE("empty prompts skip the tracker")
{
    RecordingTracker tracker({8, 8});
    const auto state = track_shot(10, {8, 8}, {}, tracker, TrackingParams{});
    CHECK(tracker.calls.empty());
    CHECK(state.registry.entries().empty());
}

TEST_CASE("tracker failures carry the frame range")
{
    FailingTracker tracker;
    std::map<int, FrameLayers> s2{{0, stage2_of(0, {rect_mask(8, 8, 0, 0, 3, 3)})}};
    try {
        track_shot(30, {8, 8}, s2, tracker, TrackingParams{});
        FAIL("expected TrackingError");
    } catch (const TrackingError& e) {
        CHECK(std::string(e.what()).find("frames 0..20") != std::string::npos);
        CHECK(std::string(e.what()).find("model crashed") != std::string::npos);
    }
}

TEST_CASE("progress counts prompt steps over both passes")
{
    RecordingTracker tracker({8, 8});
    std::map<int, FrameLayers> s2{{0, stage2_of(0, {rect_mask(8, 8, 0, 0, 3, 3)})}};
    std::vector<std::pair<int, int>> seen;
    track_shot(12, {8, 8}, s2, tracker, TrackingParams{}, true,
               [&](int done, int total) { seen.emplace_back(done, total); });
    REQUIRE(seen.size() == 6);
    for (std::size_t i = 0; i < seen.size(); ++i) {
        CHECK(seen[i].first == static_cast<int>(i) + 1);
        CHECK(seen[i].second == 6);
    }
}

TEST_CASE("backward pass consults stage-2 only at the last frame")
{
    RecordingTracker tracker({20, 10});
    std::map<int, FrameLayers> s2;
    // A second object shows up in stage 2 at frame 6 only; it is not on the
    // forward schedule, so neither pass may pick it up.
    s2[0] = stage2_of(0, {rect_mask(20, 10, 0, 0, 4, 4)});
    s2[6] = stage2_of(6, {rect_mask(20, 10, 0, 0, 4, 4), rect_mask(20, 10, 10, 0, 14, 4)});
    const auto state = track_shot(12, {20, 10}, s2, tracker, TrackingParams{});
    CHECK(state.registry.entries().size() == 1);

    // Seen on the last frame, it gets an id during the backward pass.
    s2[11] = stage2_of(11, {rect_mask(20, 10, 0, 0, 4, 4), rect_mask(20, 10, 10, 0, 14, 4)});
    const auto with_last = track_shot(12, {20, 10}, s2, tracker, TrackingParams{});
    REQUIRE(with_last.registry.entries().size() == 2);
    CHECK(with_last.cache.frames[0].ids.at(11, 1) == 2);
}

TEST_CASE("finalize thresholds the cache per layer")
{
    LayerRegistry reg;
    reg.allocate("person", 0);
    reg.allocate("person", 0);
    MaskCache cache(1, 2, 1);
    cache.frames[0].ids[0] = 2;
    cache.frames[0].probs[0] = 0.7f;
    cache.frames[0].ids[1] = 2;
    cache.frames[0].probs[1] = 0.4f;
    const auto out = finalize(cache, reg);
    REQUIRE(out.size() == 1);
    REQUIRE(out[0].layers.size() == 2);
    CHECK(area(out[0].layers[0].mask) == 0);
    CHECK(out[0].layers[1].key == 2);
    CHECK(out[0].layers[1].mask[0] == 1);
    CHECK(out[0].layers[1].mask[1] == 0);

    const auto none = finalize(MaskCache(3, 4, 4), LayerRegistry{});
    REQUIRE(none.size() == 3);
    for (const auto& f : none) {
        CHECK(f.layers.empty());
    }
}
