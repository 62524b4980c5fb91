// Copyright 2026 The maskpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "maskpipe/backends.hpp"

#include <algorithm>
#include <cctype>

namespace maskpipe {

std::vector<std::string> split_prompt(std::string_view prompt)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= prompt.size()) {
        std::size_t end = prompt.find(',', start);
        if (end == std::string_view::npos) {
            end = prompt.size();
        }
        std::string_view piece = prompt.substr(start, end - start);
        while (!piece.empty() && std::isspace(static_cast<unsigned char>(piece.front()))) {
            piece.remove_prefix(1);
        }
        while (!piece.empty() && std::isspace(static_cast<unsigned char>(piece.back()))) {
            piece.remove_suffix(1);
        }
        if (!piece.empty()) {
            out.emplace_back(piece);
        }
        start = end + 1;
    }
    return out;
}

std::vector<TrackerPrediction> IdentityTracker::track(std::span<const int> frames,
                                                      const std::map<LayerId, BinaryMask>& prompt) const
{
    std::vector<TrackerPrediction> out;
    out.reserve(frames.size());
    for (std::size_t k = 0; k < frames.size(); ++k) {
        TrackerPrediction pred{frames[k], {}};
        const float conf = static_cast<float>(std::max(0.0, confidence_ - decay_ * static_cast<double>(k)));
        for (const auto& [id, mask] : prompt) {
            ProbMask pm(mask.width(), mask.height(), 0.0f);
            for (std::size_t i = 0; i < mask.size(); ++i) {
                pm[i] = mask[i] ? conf : 0.0f;
            }
            pred.per_layer.emplace(id, std::move(pm));
        }
        out.push_back(std::move(pred));
    }
    return out;
}

}  // namespace maskpipe
