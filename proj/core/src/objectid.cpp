// Copyright 2026 The maskpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "maskpipe/objectid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace maskpipe {

namespace {

constexpr char kMagic[4] = {'O', 'I', 'D', 'F'};
constexpr std::size_t kHeaderSize = 4 + 2 + 2 + 4 + 4 + 4;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v)
{
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
    }
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t pos() const { return pos_; }

    bool has(std::size_t n) const { return bytes_.size() - pos_ >= n; }

    void need(std::size_t n, const char* what, std::optional<std::size_t> pixel = std::nullopt) const
    {
        if (!has(n)) {
            std::string msg = std::string("truncated ") + what;
            if (pixel) {
                msg += " at pixel " + std::to_string(*pixel);
            }
            throw ObjectIdError(msg, pos_, pixel);
        }
    }

    std::uint8_t u8() { return bytes_[pos_++]; }

    std::uint16_t u16()
    {
        const auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }

    std::uint32_t u32()
    {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
        }
        pos_ += 4;
        return v;
    }

    std::string_view text(std::size_t n)
    {
        std::string_view s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

std::string describe(const std::string& what, std::size_t offset, std::optional<std::size_t> pixel)
{
    std::string msg = "objectid: " + what + " (offset " + std::to_string(offset);
    if (pixel) {
        msg += ", pixel " + std::to_string(*pixel);
    }
    return msg + ")";
}

}  // namespace

ObjectIdError::ObjectIdError(const std::string& what, std::size_t offset, std::optional<std::size_t> pixel)
    : std::runtime_error(describe(what, offset, pixel)), offset_(offset), pixel_(pixel)
{}

std::uint16_t quantize_alpha(float alpha)
{
    const double a = std::clamp(static_cast<double>(alpha), 0.0, 1.0);
    return static_cast<std::uint16_t>(std::lround(a * 65535.0));
}

float dequantize_alpha(std::uint16_t q)
{
    return static_cast<float>(static_cast<double>(q) / 65535.0);
}

std::vector<std::uint8_t> encode(const ObjectIdFrame& frame)
{
    if (frame.width < 1 || frame.height < 1 ||
        frame.pixels.size() != static_cast<std::size_t>(frame.width) * static_cast<std::size_t>(frame.height)) {
        throw ObjectIdError("frame dimensions do not match pixel count", 0);
    }
    std::string manifest;
    for (const auto& [id, name] : frame.manifest) {
        if (id == 0) {
            throw ObjectIdError("manifest uses reserved id 0", 0);
        }
        if (name.find_first_of("\t\n") != std::string::npos) {
            throw ObjectIdError("manifest name for id " + std::to_string(id) + " contains tab or newline", 0);
        }
        manifest += std::to_string(id);
        manifest += '\t';
        manifest += name;
        manifest += '\n';
    }

    std::vector<std::uint8_t> out;
    out.reserve(kHeaderSize + manifest.size() + frame.pixels.size());
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u16(out, kObjectIdVersion);
    put_u16(out, 0);
    put_u32(out, static_cast<std::uint32_t>(frame.width));
    put_u32(out, static_cast<std::uint32_t>(frame.height));
    put_u32(out, static_cast<std::uint32_t>(manifest.size()));
    out.insert(out.end(), manifest.begin(), manifest.end());

    std::vector<IdSample> sorted;
    for (std::size_t p = 0; p < frame.pixels.size(); ++p) {
        const auto& samples = frame.pixels[p];
        if (samples.size() > kObjectIdMaxSamples) {
            throw ObjectIdError("pixel has " + std::to_string(samples.size()) + " samples, limit is 255",
                                out.size(), p);
        }
        sorted = samples;
        std::sort(sorted.begin(), sorted.end(), [](const IdSample& a, const IdSample& b) { return a.id < b.id; });
        for (std::size_t k = 0; k < sorted.size(); ++k) {
            if (sorted[k].id == 0) {
                throw ObjectIdError("sample uses reserved id 0", out.size(), p);
            }
            if (k > 0 && sorted[k].id == sorted[k - 1].id) {
                throw ObjectIdError("duplicate sample id " + std::to_string(sorted[k].id), out.size(), p);
            }
            if (frame.manifest.count(sorted[k].id) == 0) {
                throw ObjectIdError("sample id " + std::to_string(sorted[k].id) + " missing from manifest",
                                    out.size(), p);
            }
        }
        out.push_back(static_cast<std::uint8_t>(sorted.size()));
        for (const auto& s : sorted) {
            put_u32(out, s.id);
            put_u16(out, quantize_alpha(s.alpha));
        }
    }
    return out;
}

ObjectIdFrame decode(std::span<const std::uint8_t> bytes)
{
    Reader r(bytes);
    r.need(4, "magic");
    if (!std::equal(kMagic, kMagic + 4, bytes.begin())) {
        throw ObjectIdError("bad magic", 0);
    }
    r.text(4);
    r.need(2, "version");
    const std::size_t version_at = r.pos();
    const auto version = r.u16();
    if (version != kObjectIdVersion) {
        throw ObjectIdError("unsupported version " + std::to_string(version), version_at);
    }
    r.need(2 + 4 + 4 + 4, "header");
    const std::size_t flags_at = r.pos();
    if (r.u16() != 0) {
        throw ObjectIdError("unsupported flags", flags_at);
    }
    const std::size_t dims_at = r.pos();
    const auto width = r.u32();
    const auto height = r.u32();
    if (width == 0 || height == 0 || width > static_cast<std::uint32_t>(std::numeric_limits<int>::max()) ||
        height > static_cast<std::uint32_t>(std::numeric_limits<int>::max())) {
        throw ObjectIdError("invalid dimensions", dims_at);
    }
    const std::uint64_t pixel_count = static_cast<std::uint64_t>(width) * height;
    // every pixel needs at least its count byte
    if (pixel_count > bytes.size()) {
        throw ObjectIdError("truncated pixel section: dimensions exceed data size", dims_at, std::size_t{0});
    }
    const auto manifest_len = r.u32();
    r.need(manifest_len, "manifest");
    const std::size_t manifest_at = r.pos();
    const std::string_view manifest = r.text(manifest_len);

    ObjectIdFrame frame(static_cast<int>(width), static_cast<int>(height));
    std::size_t line_start = 0;
    std::uint32_t last_id = 0;
    while (line_start < manifest.size()) {
        const std::size_t nl = manifest.find('\n', line_start);
        if (nl == std::string_view::npos) {
            throw ObjectIdError("manifest line not terminated", manifest_at + line_start);
        }
        const std::string_view line = manifest.substr(line_start, nl - line_start);
        const std::size_t tab = line.find('\t');
        if (tab == std::string_view::npos || tab == 0) {
            throw ObjectIdError("manifest line without id", manifest_at + line_start);
        }
        std::uint64_t id = 0;
        for (char c : line.substr(0, tab)) {
            if (c < '0' || c > '9' || id > 0xffffffffULL) {
                throw ObjectIdError("manifest id is not a number", manifest_at + line_start);
            }
            id = id * 10 + static_cast<std::uint64_t>(c - '0');
        }
        if (id == 0 || id > 0xffffffffULL) {
            throw ObjectIdError("manifest id out of range", manifest_at + line_start);
        }
        if (id <= last_id) {
            throw ObjectIdError("manifest not sorted by id", manifest_at + line_start);
        }
        last_id = static_cast<std::uint32_t>(id);
        frame.manifest.emplace(static_cast<std::uint32_t>(id), std::string(line.substr(tab + 1)));
        line_start = nl + 1;
    }

    for (std::size_t p = 0; p < frame.pixels.size(); ++p) {
        r.need(1, "pixel section", p);
        const auto count = r.u8();
        r.need(static_cast<std::size_t>(count) * 6, "pixel section", p);
        auto& samples = frame.pixels[p];
        samples.reserve(count);
        for (int k = 0; k < count; ++k) {
            const std::size_t at = r.pos();
            const auto id = r.u32();
            const auto alpha = r.u16();
            if (id == 0 || frame.manifest.count(id) == 0) {
                throw ObjectIdError("sample id " + std::to_string(id) + " missing from manifest", at, p);
            }
            if (!samples.empty() && samples.back().id >= id) {
                throw ObjectIdError("samples not sorted by id", at, p);
            }
            samples.push_back(IdSample{id, dequantize_alpha(alpha)});
        }
    }
    if (r.has(1)) {
        throw ObjectIdError("trailing bytes after pixel section", r.pos());
    }
    return frame;
}

bool glob_match(std::string_view pattern, std::string_view text)
{
    std::size_t p = 0;
    std::size_t t = 0;
    std::size_t star = std::string_view::npos;
    std::size_t resume = 0;
    while (t < text.size()) {
        if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == text[t])) {
            ++p;
            ++t;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            resume = t;
        } else if (star != std::string_view::npos) {
            p = star + 1;
            t = ++resume;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') {
        ++p;
    }
    return p == pattern.size();
}

MatteResult filter_matte(const ObjectIdFrame& frame, std::string_view pattern)
{
    if (pattern.empty()) {
        throw std::invalid_argument("filter_matte: empty pattern");
    }
    MatteResult result{Grid<float>(frame.width, frame.height, 0.0f), {}};
    std::set<std::uint32_t> ids;
    for (const auto& [id, name] : frame.manifest) {
        if (glob_match(pattern, name)) {
            ids.insert(id);
        }
    }
    if (ids.empty()) {
        result.warnings.push_back("filter '" + std::string(pattern) + "' matches no manifest entry");
        return result;
    }
    for (std::size_t p = 0; p < frame.pixels.size(); ++p) {
        double sum = 0.0;
        for (const auto& s : frame.pixels[p]) {
            if (ids.count(s.id) != 0) {
                sum += static_cast<double>(s.alpha);
            }
        }
        result.matte[p] = static_cast<float>(std::min(sum, 1.0));
    }
    return result;
}

std::map<std::uint32_t, std::string> build_manifest(const MaskCache& cache, const LayerRegistry& registry,
                                                    double tau)
{
    std::map<LayerId, int> first_frame;
    for (const auto& [id, info] : registry.entries()) {
        first_frame[id] = std::numeric_limits<int>::max();
    }
    for (std::size_t f = 0; f < cache.frames.size(); ++f) {
        const auto& frame = cache.frames[f];
        for (std::size_t i = 0; i < frame.ids.size(); ++i) {
            const LayerId id = frame.ids[i];
            if (id == 0 || static_cast<double>(frame.probs[i]) < tau) {
                continue;
            }
            auto it = first_frame.find(id);
            if (it != first_frame.end() && it->second > static_cast<int>(f)) {
                it->second = static_cast<int>(f);
            }
        }
    }
    std::vector<std::pair<int, LayerId>> order;
    for (const auto& [id, f] : first_frame) {
        order.emplace_back(f, id);
    }
    std::sort(order.begin(), order.end());
    std::map<std::string, int> per_label;
    std::map<std::uint32_t, std::string> manifest;
    for (const auto& [f, id] : order) {
        const auto& label = registry.at(id).label;
        manifest[id] = label + ":" + std::to_string(++per_label[label]);
    }
    return manifest;
}

ObjectIdFrame from_tracking(const CacheFrame& frame, const std::map<std::uint32_t, std::string>& manifest,
                            double tau, const std::map<LayerId, ProbMask>* per_layer)
{
    ObjectIdFrame out(frame.width(), frame.height());
    out.manifest = manifest;
    if (per_layer != nullptr) {
        for (const auto& [id, pm] : *per_layer) {
            require_same_shape(frame.ids, pm, "from_tracking");
        }
    }
    for (std::size_t i = 0; i < frame.ids.size(); ++i) {
        auto& samples = out.pixels[i];
        if (per_layer != nullptr) {
            double sum = 0.0;
            for (const auto& [id, pm] : *per_layer) {
                if (static_cast<double>(pm[i]) >= tau && manifest.count(id) != 0) {
                    samples.push_back(IdSample{id, pm[i]});
                    sum += static_cast<double>(pm[i]);
                }
            }
            if (sum > 1.0) {
                for (auto& s : samples) {
                    s.alpha = static_cast<float>(static_cast<double>(s.alpha) / sum);
                }
            }
            continue;
        }
        const LayerId id = frame.ids[i];
        if (id != 0 && static_cast<double>(frame.probs[i]) >= tau && manifest.count(id) != 0) {
            samples.push_back(IdSample{id, frame.probs[i]});
        }
    }
    return out;
}

}  // namespace maskpipe
