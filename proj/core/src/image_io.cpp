// Copyright 2026 The maskpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "maskpipe/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>

namespace maskpipe {

namespace {

class HeaderReader {
public:
    explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    void skip_space_and_comments()
    {
        while (pos_ < bytes_.size()) {
            const auto c = bytes_[pos_];
            if (c == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') {
                    ++pos_;
                }
            } else if (std::isspace(c)) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    long number()
    {
        skip_space_and_comments();
        if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) {
            throw ImageError("pnm: expected a number at byte " + std::to_string(pos_));
        }
        long v = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            v = v * 10 + (bytes_[pos_] - '0');
            if (v > 1'000'000'000) {
                throw ImageError("pnm: number too large");
            }
            ++pos_;
        }
        return v;
    }

    std::size_t pos() const { return pos_; }
    void advance(std::size_t n) { pos_ += n; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

Image decode_pnm(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < 2 || bytes[0] != 'P') {
        throw ImageError("pnm: bad magic");
    }
    const char kind = static_cast<char>(bytes[1]);
    int channels = 0;
    bool ascii = false;
    switch (kind) {
    case '2': channels = 1; ascii = true; break;
    case '3': channels = 3; ascii = true; break;
    case '5': channels = 1; break;
    case '6': channels = 3; break;
    default: throw ImageError(std::string("pnm: unsupported type P") + kind);
    }
    HeaderReader r(bytes);
    r.advance(2);
    const long w = r.number();
    const long h = r.number();
    const long maxval = r.number();
    if (w < 1 || h < 1 || maxval < 1 || maxval > 65535) {
        throw ImageError("pnm: invalid header values");
    }
    Image img(static_cast<int>(w), static_cast<int>(h), channels, static_cast<int>(maxval));
    if (ascii) {
        for (auto& s : img.samples) {
            const long v = r.number();
            s = static_cast<std::uint16_t>(std::min(v, maxval));
        }
        return img;
    }
    // exactly one whitespace byte after maxval
    r.advance(1);
    const std::size_t bps = maxval > 255 ? 2 : 1;
    const std::size_t need = img.samples.size() * bps;
    if (bytes.size() < r.pos() + need) {
        throw ImageError("pnm: truncated pixel data");
    }
    const auto* p = bytes.data() + r.pos();
    for (std::size_t i = 0; i < img.samples.size(); ++i) {
        img.samples[i] = bps == 2 ? static_cast<std::uint16_t>((p[2 * i] << 8) | p[2 * i + 1]) : p[i];
    }
    return img;
}

std::vector<std::uint8_t> encode_pnm(const Image& image)
{
    if (image.channels != 1 && image.channels != 3) {
        throw ImageError("pnm: only 1 or 3 channels supported");
    }
    const std::string header = std::string(image.channels == 1 ? "P5" : "P6") + "\n" +
                               std::to_string(image.width) + " " + std::to_string(image.height) +
                               "\n" + std::to_string(image.maxval) + "\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    const bool wide = image.maxval > 255;
    out.reserve(out.size() + image.samples.size() * (wide ? 2 : 1));
    for (auto s : image.samples) {
        if (wide) {
            out.push_back(static_cast<std::uint8_t>(s >> 8));
        }
        out.push_back(static_cast<std::uint8_t>(s & 0xff));
    }
    return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw std::runtime_error("write failed: " + path.string());
    }
}

std::string read_text(const std::filesystem::path& path)
{
    const auto bytes = read_file(path);
    return {bytes.begin(), bytes.end()};
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Image read_pnm(const std::filesystem::path& path)
{
    return decode_pnm(read_file(path));
}

void write_pnm(const std::filesystem::path& path, const Image& image)
{
    write_file(path, encode_pnm(image));
}

Image mask_to_image(const BinaryMask& mask)
{
    Image img(mask.width(), mask.height(), 1, 255);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        img.samples[i] = mask[i] ? 255 : 0;
    }
    return img;
}

BinaryMask image_to_mask(const Image& image)
{
    BinaryMask m(image.width, image.height, 0);
    for (std::size_t i = 0; i < m.size(); ++i) {
        m[i] = image.samples[i * static_cast<std::size_t>(image.channels)] != 0 ? 1 : 0;
    }
    return m;
}

Image prob_to_image8(const ProbMask& probs)
{
    Image img(probs.width(), probs.height(), 1, 255);
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double v = std::clamp(static_cast<double>(probs[i]), 0.0, 1.0);
        img.samples[i] = static_cast<std::uint16_t>(std::lround(v * 255.0));
    }
    return img;
}

ProbMask image_to_prob(const Image& image)
{
    ProbMask p(image.width, image.height, 0.0f);
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = static_cast<float>(image.samples[i * static_cast<std::size_t>(image.channels)]) /
               static_cast<float>(image.maxval);
    }
    return p;
}

Image matte_to_image16(const Grid<float>& matte)
{
    Image img(matte.width(), matte.height(), 1, 65535);
    for (std::size_t i = 0; i < matte.size(); ++i) {
        const double v = std::clamp(static_cast<double>(matte[i]), 0.0, 1.0);
        img.samples[i] = static_cast<std::uint16_t>(std::lround(v * 65535.0));
    }
    return img;
}

std::string frame_name(const std::string& stem, int frame, const std::string& ext)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d", frame);
    return stem + "." + buf + "." + ext;
}

}  // namespace maskpipe
