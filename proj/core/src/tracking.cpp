// Copyright 2026 The maskpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "maskpipe/tracking.hpp"

#include <algorithm>
#include <set>

namespace maskpipe {

bool CacheFrame::is_empty() const
{
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] != 0 || probs[i] != 0.0f) {
            return false;
        }
    }
    return true;
}

MaskCache::MaskCache(int frame_count, int width, int height)
{
    frames.reserve(static_cast<std::size_t>(std::max(0, frame_count)));
    for (int i = 0; i < frame_count; ++i) {
        frames.emplace_back(width, height);
    }
}

LayerId LayerRegistry::allocate(std::string label, int frame)
{
    const LayerId id = next_id_++;
    entries_.emplace(id, LayerInfo{std::move(label), frame});
    return id;
}

const LayerInfo& LayerRegistry::at(LayerId id) const
{
    auto it = entries_.find(id);
    if (it == entries_.end()) {
        throw std::out_of_range("unknown layer id " + std::to_string(id));
    }
    return it->second;
}

LayerRegistry LayerRegistry::restore(LayerId next_id, std::map<LayerId, LayerInfo> entries)
{
    if (entries.count(0) != 0) {
        throw std::invalid_argument("layer id 0 is reserved for background");
    }
    if (!entries.empty() && entries.rbegin()->first >= next_id) {
        throw std::invalid_argument("registry next_id must exceed every allocated id");
    }
    LayerRegistry r;
    r.next_id_ = next_id;
    r.entries_ = std::move(entries);
    return r;
}

void TrackingParams::validate() const
{
    if (prompt_step < 1 || prompt_step > track_interval) {
        throw std::invalid_argument("tracking: require 1 <= prompt_step <= track_interval");
    }
    auto unit = [](double v, const char* name) {
        if (!(v > 0.0 && v < 1.0)) {
            throw std::invalid_argument(std::string("tracking: ") + name + " must be in (0,1)");
        }
    };
    unit(epsilon, "epsilon");
    unit(direct_match_iou, "direct_match_iou");
    unit(partial.discard, "discard threshold");
    unit(partial.merge, "merge threshold");
    unit(binarize_tau, "binarize_tau");
}

bool beats_cache(double cached, double candidate, double epsilon)
{
    return cached + epsilon <= candidate + kProbTolerance;
}

CacheFrame merge_prediction(const CacheFrame& frame, const TrackerPrediction& pred,
                            const LayerRegistry& registry, double epsilon)
{
    for (const auto& [id, pm] : pred.per_layer) {
        if (id == 0 || !registry.contains(id)) {
            throw std::invalid_argument("merge_prediction: unknown layer id " + std::to_string(id));
        }
        require_same_shape(frame.ids, pm, "merge_prediction");
    }

    const std::size_t n = frame.ids.size();
    std::vector<LayerId> best_id(n, 0);
    std::vector<float> best_prob(n, 0.0f);
    // std::map iterates ascending, so strict > leaves ties with the lowest id.
    for (const auto& [id, pm] : pred.per_layer) {
        for (std::size_t i = 0; i < n; ++i) {
            if (pm[i] > best_prob[i]) {
                best_prob[i] = pm[i];
                best_id[i] = id;
            }
        }
    }

    CacheFrame out = frame;
    if (frame.is_empty()) {
        for (std::size_t i = 0; i < n; ++i) {
            out.ids[i] = best_prob[i] > 0.0f ? best_id[i] : 0;
            out.probs[i] = best_prob[i];
        }
        return out;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (best_prob[i] > 0.0f && beats_cache(frame.probs[i], best_prob[i], epsilon)) {
            out.ids[i] = best_id[i];
            out.probs[i] = best_prob[i];
        }
    }
    return out;
}

std::map<LayerId, BinaryMask> cache_layers(const CacheFrame& frame, double tau)
{
    std::map<LayerId, BinaryMask> out;
    for (std::size_t i = 0; i < frame.ids.size(); ++i) {
        const LayerId id = frame.ids[i];
        if (id == 0 || static_cast<double>(frame.probs[i]) < tau) {
            continue;
        }
        auto it = out.find(id);
        if (it == out.end()) {
            it = out.emplace(id, BinaryMask(frame.width(), frame.height(), 0)).first;
        }
        it->second[i] = 1;
    }
    return out;
}

const char* to_string(MatchKind kind)
{
    switch (kind) {
    case MatchKind::Direct: return "direct";
    case MatchKind::Partial: return "partial";
    case MatchKind::DroppedMultiple: return "dropped_multiple";
    case MatchKind::DroppedWeak: return "dropped_weak";
    case MatchKind::NewLayer: return "new_layer";
    }
    return "unknown";
}

PromptBuild build_prompt_mask(const CacheFrame& frame, const FrameLayers& stage2,
                              const LayerRegistry& registry, const TrackingParams& params)
{
    PromptBuild out;
    out.registry = registry;
    const auto cached = cache_layers(frame, params.binarize_tau);
    out.prompt = cached;

    for (const auto& layer : stage2.layers) {
        require_same_shape(frame.ids, layer.mask, "build_prompt_mask");
        const std::size_t s_area = area(layer.mask);
        if (s_area == 0) {
            continue;
        }
        MatchEntry entry{layer.key, MatchKind::NewLayer, 0, 0.0, {}};

        LayerId direct = 0;
        double best_iou = 0.0;
        for (const auto& [id, cm] : cached) {
            const double v = iou(layer.mask, cm);
            if (v > best_iou) {
                best_iou = v;
                direct = id;
            }
        }
        if (direct != 0 && best_iou >= params.direct_match_iou) {
            entry.kind = MatchKind::Direct;
            entry.layer = direct;
            entry.metric = best_iou;
            unite_into(out.prompt.at(direct), layer.mask);
            out.report.push_back(std::move(entry));
            continue;
        }

        // Asymmetric overlap in both directions: the stage-2 mask may enclose
        // a partial cache layer or be enclosed by it.
        LayerId strongest = 0;
        double strongest_overlap = 0.0;
        for (const auto& [id, cm] : cached) {
            const std::size_t inter = intersection_area(layer.mask, cm);
            if (inter == 0) {
                continue;
            }
            const double overlap =
                std::max(static_cast<double>(inter) / static_cast<double>(s_area),
                         static_cast<double>(inter) / static_cast<double>(area(cm)));
            if (overlap >= params.partial.discard) {
                entry.overlapping.push_back(id);
                if (overlap > strongest_overlap) {
                    strongest_overlap = overlap;
                    strongest = id;
                }
            }
        }
        entry.metric = strongest_overlap;

        if (entry.overlapping.size() > 1) {
            entry.kind = MatchKind::DroppedMultiple;
        } else if (entry.overlapping.size() == 1) {
            if (strongest_overlap >= params.partial.merge) {
                entry.kind = MatchKind::Partial;
                entry.layer = strongest;
                unite_into(out.prompt.at(strongest), layer.mask);
            } else {
                entry.kind = MatchKind::DroppedWeak;
            }
        } else {
            entry.kind = MatchKind::NewLayer;
            entry.layer = out.registry.allocate(layer.label, stage2.frame_index);
            out.prompt.emplace(entry.layer, layer.mask);
        }
        out.report.push_back(std::move(entry));
    }
    return out;
}

std::vector<int> forward_schedule(int shot_len, const TrackingParams& params)
{
    std::set<int> frames;
    for (int t = 0; t < shot_len; t += params.prompt_step) {
        frames.insert(t);
    }
    for (int k : params.keyframes) {
        if (k >= 0 && k < shot_len) {
            frames.insert(k);
        }
    }
    return {frames.begin(), frames.end()};
}

std::vector<int> backward_schedule(int shot_len, const TrackingParams& params)
{
    std::vector<int> frames;
    for (int t = shot_len - 1; t >= 0; t -= params.prompt_step) {
        frames.push_back(t);
    }
    return frames;
}

std::vector<int> tracking_range(int t, int shot_len, int interval, bool reverse)
{
    std::vector<int> frames;
    if (reverse) {
        for (int f = t; f >= std::max(0, t - interval); --f) {
            frames.push_back(f);
        }
    } else {
        for (int f = t; f <= std::min(shot_len - 1, t + interval); ++f) {
            frames.push_back(f);
        }
    }
    return frames;
}

namespace {

TrackingState run_pass(int shot_len, const std::map<int, FrameLayers>& stage2,
                       const VideoTracker& tracker, const TrackingParams& params, TrackingState state,
                       bool reverse, const ProgressFn& progress, int steps_before, int steps_total)
{
    params.validate();
    if (state.cache.frame_count() != shot_len) {
        throw std::invalid_argument("tracking: cache length " +
                                    std::to_string(state.cache.frame_count()) +
                                    " does not match shot length " + std::to_string(shot_len));
    }
    const auto schedule = reverse ? backward_schedule(shot_len, params) : forward_schedule(shot_len, params);
    if (steps_total == 0) {
        steps_total = steps_before + static_cast<int>(schedule.size());
    }

    int done = steps_before;
    for (const int t : schedule) {
        FrameLayers prompt_source{t, {}};
        const bool consult_stage2 = !reverse || t == shot_len - 1;
        if (consult_stage2) {
            if (auto it = stage2.find(t); it != stage2.end()) {
                prompt_source = it->second;
                prompt_source.frame_index = t;
            }
        }
        auto built = build_prompt_mask(state.cache.frames[static_cast<std::size_t>(t)], prompt_source,
                                       state.registry, params);
        state.registry = std::move(built.registry);

        if (!built.prompt.empty()) {
            const auto frames = tracking_range(t, shot_len, params.track_interval, reverse);
            const std::string range = "frames " + std::to_string(frames.front()) + ".." +
                                      std::to_string(frames.back());
            std::vector<TrackerPrediction> preds;
            try {
                preds = tracker.track(frames, built.prompt);
            } catch (const std::exception& e) {
                throw TrackingError("tracker failed on " + range + ": " + e.what());
            }
            if (preds.size() != frames.size()) {
                throw TrackingError("tracker returned " + std::to_string(preds.size()) +
                                    " predictions for " + range);
            }
            for (std::size_t k = 0; k < preds.size(); ++k) {
                if (preds[k].frame_index != frames[k]) {
                    throw TrackingError("tracker returned frame " + std::to_string(preds[k].frame_index) +
                                        " out of order for " + range);
                }
                auto& slot = state.cache.frames[static_cast<std::size_t>(frames[k])];
                slot = merge_prediction(slot, preds[k], state.registry, params.epsilon);
            }
        }
        ++done;
        if (progress) {
            progress(done, steps_total);
        }
    }
    return state;
}

}  // namespace

TrackingState forward_pass(int shot_len, const std::map<int, FrameLayers>& stage2,
                           const VideoTracker& tracker, const TrackingParams& params,
                           TrackingState state, const ProgressFn& progress, int steps_before,
                           int steps_total)
{
    return run_pass(shot_len, stage2, tracker, params, std::move(state), false, progress, steps_before,
                    steps_total);
}

TrackingState backward_pass(int shot_len, const std::map<int, FrameLayers>& stage2,
                            const VideoTracker& tracker, const TrackingParams& params,
                            TrackingState state, const ProgressFn& progress, int steps_before,
                            int steps_total)
{
    return run_pass(shot_len, stage2, tracker, params, std::move(state), true, progress, steps_before,
                    steps_total);
}

TrackingState track_shot(int shot_len, FrameSize size, const std::map<int, FrameLayers>& stage2,
                         const VideoTracker& tracker, const TrackingParams& params, bool backward,
                         const ProgressFn& progress)
{
    TrackingState state{MaskCache(shot_len, size.width, size.height), {}};
    const int fwd = static_cast<int>(forward_schedule(shot_len, params).size());
    const int bwd = backward ? static_cast<int>(backward_schedule(shot_len, params).size()) : 0;
    state = forward_pass(shot_len, stage2, tracker, params, std::move(state), progress, 0, fwd + bwd);
    if (backward) {
        state = backward_pass(shot_len, stage2, tracker, params, std::move(state), progress, fwd, fwd + bwd);
    }
    return state;
}

std::vector<FrameLayers> finalize(const MaskCache& cache, const LayerRegistry& registry, double tau)
{
    std::vector<FrameLayers> out;
    out.reserve(cache.frames.size());
    for (std::size_t f = 0; f < cache.frames.size(); ++f) {
        const auto& frame = cache.frames[f];
        FrameLayers fl{static_cast<int>(f), {}};
        std::map<LayerId, std::size_t> slot;
        for (const auto& [id, info] : registry.entries()) {
            slot[id] = fl.layers.size();
            fl.layers.push_back(Layer{id, BinaryMask(frame.width(), frame.height(), 0), info.label});
        }
        for (std::size_t i = 0; i < frame.ids.size(); ++i) {
            const LayerId id = frame.ids[i];
            if (id == 0 || static_cast<double>(frame.probs[i]) < tau) {
                continue;
            }
            auto it = slot.find(id);
            if (it != slot.end()) {
                fl.layers[it->second].mask[i] = 1;
            }
        }
        out.push_back(std::move(fl));
    }
    return out;
}

}  // namespace maskpipe
