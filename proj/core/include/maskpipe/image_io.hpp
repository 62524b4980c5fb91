// Copyright 2026 The maskpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "maskpipe/mask.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace maskpipe {

/// Interleaved 1- or 3-channel image with 8- or 16-bit samples.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    int maxval = 255;
    std::vector<std::uint16_t> samples;

    Image() = default;
    Image(int w, int h, int c, int maxv)
        : width(w), height(h), channels(c), maxval(maxv),
          samples(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * static_cast<std::size_t>(c), 0)
    {}

    bool operator==(const Image&) const = default;
};

class ImageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Binary PGM (P5) / PPM (P6), or their ASCII forms (P2/P3) on input.
Image decode_pnm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pnm(const Image& image);

Image read_pnm(const std::filesystem::path& path);
void write_pnm(const std::filesystem::path& path, const Image& image);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

/// 0/255 grayscale.
Image mask_to_image(const BinaryMask& mask);
/// Pixels set where the sample is nonzero.
BinaryMask image_to_mask(const Image& image);
/// round(p*255) grayscale.
Image prob_to_image8(const ProbMask& probs);
/// value/maxval, first channel.
ProbMask image_to_prob(const Image& image);
/// round(v*65535) 16-bit grayscale; values clamped to [0,1].
Image matte_to_image16(const Grid<float>& matte);

/// printf-style frame-numbered name, e.g. frame_name("mask", 3, "pgm") == "mask.0003.pgm".
std::string frame_name(const std::string& stem, int frame, const std::string& ext);

}  // namespace maskpipe
