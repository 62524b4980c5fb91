// Copyright 2026 The maskpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "maskpipe/postprocess.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace maskpipe {

const Layer* FrameLayers::find(LayerKey key) const
{
    for (const auto& l : layers) {
        if (l.key == key) {
            return &l;
        }
    }
    return nullptr;
}

const char* to_string(PostprocessEvent::Kind kind)
{
    switch (kind) {
    case PostprocessEvent::Kind::DropEmpty: return "drop_empty";
    case PostprocessEvent::Kind::Discard: return "discard";
    case PostprocessEvent::Kind::Merge: return "merge";
    }
    return "unknown";
}

bool PostprocessReport::discarded(LayerKey key) const
{
    return std::any_of(events.begin(), events.end(), [&](const PostprocessEvent& e) {
        return e.kind == PostprocessEvent::Kind::Discard && e.key == key;
    });
}

bool PostprocessReport::merged(LayerKey key) const
{
    return std::any_of(events.begin(), events.end(), [&](const PostprocessEvent& e) {
        return e.kind == PostprocessEvent::Kind::Merge && e.key == key;
    });
}

namespace {

struct Working {
    Layer layer;
    std::size_t area = 0;
};

double coverage(const Working& a, const Working& b)
{
    return static_cast<double>(intersection_area(a.layer.mask, b.layer.mask)) /
           static_cast<double>(a.area);
}

// One discard step over a snapshot. Returns true if anything was removed.
bool discard_step(std::vector<Working>& live, double threshold, PostprocessReport& report)
{
    std::vector<bool> remove(live.size(), false);
    std::vector<PostprocessEvent> events;
    for (std::size_t i = 0; i < live.size(); ++i) {
        PostprocessEvent ev{PostprocessEvent::Kind::Discard, live[i].layer.key, 0, {}};
        for (std::size_t j = 0; j < live.size(); ++j) {
            if (i == j) {
                continue;
            }
            const double s = coverage(live[i], live[j]);
            if (s >= threshold) {
                ev.overlaps.emplace_back(live[j].layer.key, s);
            }
        }
        if (ev.overlaps.size() >= 2) {
            remove[i] = true;
            events.push_back(std::move(ev));
        }
    }
    if (events.empty()) {
        return false;
    }
    std::vector<Working> kept;
    for (std::size_t i = 0; i < live.size(); ++i) {
        if (!remove[i]) {
            kept.push_back(std::move(live[i]));
        }
    }
    live = std::move(kept);
    for (auto& e : events) {
        report.events.push_back(std::move(e));
    }
    return true;
}

bool merge_step(std::vector<Working>& live, double threshold, PostprocessReport& report)
{
    std::vector<bool> alive(live.size(), true);
    bool changed = false;
    for (std::size_t i = 0; i < live.size(); ++i) {
        if (!alive[i]) {
            continue;
        }
        std::vector<std::size_t> partners;
        std::vector<std::pair<LayerKey, double>> overlaps;
        for (std::size_t j = 0; j < live.size(); ++j) {
            if (j == i || !alive[j]) {
                continue;
            }
            const double s = coverage(live[i], live[j]);
            if (s >= threshold) {
                partners.push_back(j);
                overlaps.emplace_back(live[j].layer.key, s);
            }
        }
        if (partners.size() != 1) {
            continue;
        }
        Working& dst = live[partners.front()];
        unite_into(dst.layer.mask, live[i].layer.mask);
        dst.area = area(dst.layer.mask);
        alive[i] = false;
        changed = true;
        report.events.push_back(PostprocessEvent{PostprocessEvent::Kind::Merge, live[i].layer.key,
                                                 dst.layer.key, std::move(overlaps)});
    }
    if (changed) {
        std::vector<Working> kept;
        for (std::size_t i = 0; i < live.size(); ++i) {
            if (alive[i]) {
                kept.push_back(std::move(live[i]));
            }
        }
        live = std::move(kept);
    }
    return changed;
}

}  // namespace

std::pair<FrameLayers, PostprocessReport> postprocess_frame(const FrameLayers& input,
                                                            PostprocessThresholds thresholds)
{
    PostprocessReport report;
    std::vector<Working> live;
    std::set<LayerKey> keys;
    for (const auto& l : input.layers) {
        if (!keys.insert(l.key).second) {
            throw std::invalid_argument("postprocess_frame: duplicate layer key " +
                                        std::to_string(l.key));
        }
        if (!input.layers.empty()) {
            require_same_shape(input.layers.front().mask, l.mask, "postprocess_frame");
        }
        const std::size_t a = area(l.mask);
        if (a == 0) {
            report.events.push_back(PostprocessEvent{PostprocessEvent::Kind::DropEmpty, l.key, 0, {}});
            continue;
        }
        live.push_back(Working{l, a});
    }

    for (;;) {
        const bool discarded = discard_step(live, thresholds.discard, report);
        const bool merged = merge_step(live, thresholds.merge, report);
        if (!discarded && !merged) {
            break;
        }
    }

    FrameLayers out{input.frame_index, {}};
    out.layers.reserve(live.size());
    for (auto& w : live) {
        out.layers.push_back(std::move(w.layer));
    }
    return {std::move(out), std::move(report)};
}

}  // namespace maskpipe
