// Copyright 2026 The maskpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "maskpipe/mask.hpp"
#include "maskpipe/tracking.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace maskpipe {

/// One coverage sample of a pixel.
struct IdSample {
    std::uint32_t id = 0;
    float alpha = 0.0f;

    bool operator==(const IdSample&) const = default;
};

/// Multi-sample id matte for one frame. Sample ids refer to manifest names.
struct ObjectIdFrame {
    int width = 0;
    int height = 0;
    std::map<std::uint32_t, std::string> manifest;
    /// Row-major; each pixel holds 0..255 samples.
    std::vector<std::vector<IdSample>> pixels;

    ObjectIdFrame() = default;
    ObjectIdFrame(int w, int h)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h))
    {}

    std::vector<IdSample>& at(int x, int y)
    {
        return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
    }
    const std::vector<IdSample>& at(int x, int y) const
    {
        return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
    }

    bool operator==(const ObjectIdFrame&) const = default;
};

inline constexpr std::uint16_t kObjectIdVersion = 1;
inline constexpr std::size_t kObjectIdMaxSamples = 255;

/// Encoding and decoding failures. `offset` is the byte position the problem
/// was detected at; `pixel` is set for errors inside the pixel section.
class ObjectIdError : public std::runtime_error {
public:
    ObjectIdError(const std::string& what, std::size_t offset, std::optional<std::size_t> pixel = std::nullopt);

    std::size_t offset() const { return offset_; }
    std::optional<std::size_t> pixel() const { return pixel_; }

private:
    std::size_t offset_;
    std::optional<std::size_t> pixel_;
};

std::uint16_t quantize_alpha(float alpha);
float dequantize_alpha(std::uint16_t q);

/// Canonical little-endian encoding: manifest sorted by id, samples sorted
/// by id within each pixel.
///
///   "OIDF" | u16 version | u16 flags | u32 width | u32 height
///   u32 manifest_len | manifest "id\tname\n"...
///   per pixel: u8 count, count x (u32 id, u16 alpha)
std::vector<std::uint8_t> encode(const ObjectIdFrame& frame);
ObjectIdFrame decode(std::span<const std::uint8_t> bytes);

/// Case-sensitive glob with `*` and `?`.
bool glob_match(std::string_view pattern, std::string_view text);

struct MatteResult {
    Grid<float> matte;
    std::vector<std::string> warnings;
};

/// Per pixel, the summed alpha of samples whose manifest name matches the
/// pattern, clamped to 1.
MatteResult filter_matte(const ObjectIdFrame& frame, std::string_view pattern);

/// Manifest names "<label>:<n>", n counting instances of each label in order
/// of first appearance (first frame with a finalized pixel, then id).
std::map<std::uint32_t, std::string> build_manifest(const MaskCache& cache, const LayerRegistry& registry,
                                                    double tau = 0.5);

/// ObjectId frame from a cache frame. With `per_layer` probabilities, every
/// layer at or above `tau` contributes a sample (alphas rescaled to sum to at
/// most 1); otherwise the single cached sample is used.
ObjectIdFrame from_tracking(const CacheFrame& frame, const std::map<std::uint32_t, std::string>& manifest,
                            double tau = 0.5,
                            const std::map<LayerId, ProbMask>* per_layer = nullptr);

}  // namespace maskpipe
