// Copyright 2026 The maskpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "maskpipe/postprocess.hpp"

#include "doctest.h"
#include "support/oracles.hpp"

using namespace maskpipe;
using namespace maskpipe::testing;

namespace {

FrameLayers frame_of(std::vector<BinaryMask> masks)
{
    FrameLayers f;
    for (std::size_t i = 0; i < masks.size(); ++i) {
        f.layers.push_back(Layer{static_cast<LayerKey>(i), std::move(masks[i]), "person"});
    }
    return f;
}

}  // namespace

TEST_CASE("false positive spanning two people is discarded")
{
    // C covers 45% of itself with A and 40% with B; A and B are disjoint.
    const auto a = rect_mask(40, 10, 0, 0, 15, 9);
    const auto b = rect_mask(40, 10, 16, 0, 30, 10);
    const auto c = rect_mask(40, 10, 10, 0, 20, 10);
    REQUIRE(oracle_sim(c, a) == doctest::Approx(0.45));
    REQUIRE(oracle_sim(c, b) == doctest::Approx(0.40));

    const auto [out, report] = postprocess_frame(frame_of({a, b, c}));
    REQUIRE(out.layers.size() == 2);
    CHECK(out.layers[0] == Layer{0, a, "person"});
    CHECK(out.layers[1] == Layer{1, b, "person"});
    CHECK(report.discarded(2));
    REQUIRE(report.events.size() == 1);
    const auto& ev = report.events.front();
    CHECK(ev.kind == PostprocessEvent::Kind::Discard);
    REQUIRE(ev.overlaps.size() == 2);
    CHECK(ev.overlaps[0].first == 0);
    CHECK(ev.overlaps[0].second == doctest::Approx(0.45));
    CHECK(ev.overlaps[1].first == 1);
    CHECK(ev.overlaps[1].second == doctest::Approx(0.40));
}

TEST_CASE("arm fragment merges into its person")
{
    const auto body = rect_mask(30, 30, 10, 5, 20, 28);
    // 10 arm pixels, 8 of them inside the body.
    const auto arm2 = rect_mask(30, 30, 12, 10, 22, 11);
    REQUIRE(oracle_sim(arm2, body) == doctest::Approx(0.8));

    const auto [out, report] = postprocess_frame(frame_of({arm2, body}));
    REQUIRE(out.layers.size() == 1);
    CHECK(out.layers[0].key == 1);
    CHECK(out.layers[0].mask == or_masks(arm2, body));
    CHECK(report.merged(0));
    REQUIRE(report.events.size() == 1);
    CHECK(report.events[0].into == 1);
    CHECK(report.events[0].overlaps[0].second == doctest::Approx(0.8));
}

TEST_CASE("disjoint masks pass through untouched")
{
    const auto input = frame_of({rect_mask(20, 20, 0, 0, 5, 5), rect_mask(20, 20, 10, 10, 15, 15)});
    const auto [out, report] = postprocess_frame(input);
    CHECK(out == input);
    CHECK(report.empty());
}

TEST_CASE("thresholds are inclusive")
{
    // A has exactly 10 of its 100 pixels in each of B and C.
    const auto a = rect_mask(40, 10, 0, 0, 10, 10);
    const auto b = rect_mask(40, 10, 9, 0, 20, 10);
    const auto c = rect_mask(40, 10, 0, 9, 10, 10);
    REQUIRE(oracle_sim(a, b) == 0.1);
    REQUIRE(oracle_sim(a, c) == 0.1);
    const auto [out, report] = postprocess_frame(frame_of({a, b, c}), {0.1, 0.6});
    CHECK(report.discarded(0));

    // Exactly 60% coverage merges.
    const auto frag = rect_mask(40, 10, 0, 0, 10, 1);
    const auto host = rect_mask(40, 10, 4, 0, 30, 10);
    REQUIRE(oracle_sim(frag, host) == 0.6);
    const auto [merged, r2] = postprocess_frame(frame_of({frag, host}));
    CHECK(merged.layers.size() == 1);
    CHECK(r2.merged(0));
}

TEST_CASE("empty masks are dropped and reported")
{
    const auto input = frame_of({BinaryMask(8, 8, 0), rect_mask(8, 8, 0, 0, 4, 4)});
    const auto [out, report] = postprocess_frame(input);
    REQUIRE(out.layers.size() == 1);
    CHECK(out.layers[0].key == 1);
    REQUIRE(report.events.size() == 1);
    CHECK(report.events[0].kind == PostprocessEvent::Kind::DropEmpty);
}

TEST_CASE("invalid frames are rejected")
{
    auto dup = frame_of({rect_mask(8, 8, 0, 0, 2, 2), rect_mask(8, 8, 4, 4, 6, 6)});
    dup.layers[1].key = 0;
    CHECK_THROWS_AS(postprocess_frame(dup), std::invalid_argument);

    auto mixed = frame_of({rect_mask(8, 8, 0, 0, 2, 2), rect_mask(9, 8, 4, 4, 6, 6)});
    CHECK_THROWS_AS(postprocess_frame(mixed), DimensionMismatch);
}

TEST_CASE("merge keeps the destination key regardless of order")
{
    const auto body = rect_mask(30, 30, 10, 5, 20, 28);
    const auto arm = rect_mask(30, 30, 12, 10, 22, 11);
    FrameLayers f;
    f.layers.push_back(Layer{7, body, "person"});
    f.layers.push_back(Layer{3, arm, "person"});
    const auto [out, report] = postprocess_frame(f);
    REQUIRE(out.layers.size() == 1);
    CHECK(out.layers[0].key == 7);
}

TEST_CASE("duplicate detections of one person collapse to one layer")
{
    const auto p = rect_mask(30, 30, 5, 5, 15, 25);
    const auto [out, report] = postprocess_frame(frame_of({p, p}));
    REQUIRE(out.layers.size() == 1);
    CHECK(out.layers[0].key == 1);
    CHECK(out.layers[0].mask == p);
}
