// Copyright 2026 The maskpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "maskpipe/sidecar.hpp"

#include "maskpipe/image_io.hpp"

#include "json.hpp"

#include <cstdio>

namespace maskpipe {

using nlohmann::json;

std::string detections_to_json(const DetectionsDocument& doc)
{
    json frames = json::array();
    for (const auto& [index, dets] : doc) {
        json jd = json::array();
        for (const auto& d : dets) {
            jd.push_back({{"bbox", {d.bbox.x0, d.bbox.y0, d.bbox.x1, d.bbox.y1}}, {"score", d.score},
                          {"label", d.label}});
        }
        frames.push_back({{"index", index}, {"detections", jd}});
    }
    return json{{"frames", frames}}.dump(2) + "\n";
}

DetectionsDocument parse_detections(const std::string& json_text)
{
    DetectionsDocument doc;
    try {
        const json j = json::parse(json_text);
        for (const auto& f : j.at("frames")) {
            const int index = f.at("index").get<int>();
            if (index < 0) {
                throw SidecarFormatError("detections: negative frame index");
            }
            auto& list = doc[index];
            for (const auto& d : f.at("detections")) {
                const auto& b = d.at("bbox");
                if (!b.is_array() || b.size() != 4) {
                    throw SidecarFormatError("detections: bbox must have 4 numbers");
                }
                Detection det{Box{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()},
                              d.value("score", 1.0), d.value("label", std::string())};
                if (!det.bbox.valid()) {
                    throw SidecarFormatError("detections: degenerate bbox on frame " + std::to_string(index));
                }
                list.push_back(std::move(det));
            }
        }
    } catch (const json::exception& e) {
        throw SidecarFormatError(std::string("detections: malformed document: ") + e.what());
    }
    return doc;
}

std::string sidecar_mask_name(int frame, int detection)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "mask.%04d.%02d.pgm", frame, detection);
    return buf;
}

void write_sidecar(const std::filesystem::path& dir, const DetectionsDocument& doc,
                   const std::map<std::pair<int, int>, ProbMask>& masks)
{
    std::filesystem::create_directories(dir);
    write_text(dir / kDetectionsFile, detections_to_json(doc));
    for (const auto& [key, pm] : masks) {
        write_pnm(dir / sidecar_mask_name(key.first, key.second), prob_to_image8(pm));
    }
}

std::shared_ptr<SidecarBackend> SidecarBackend::load(const std::filesystem::path& dir, FrameSize expected)
{
    const auto path = dir / kDetectionsFile;
    if (!std::filesystem::exists(path)) {
        throw SidecarFormatError("sidecar: missing " + path.string());
    }
    return std::make_shared<SidecarBackend>(dir, expected, parse_detections(read_text(path)));
}

std::vector<Detection> SidecarBackend::detect(int frame, std::string_view) const
{
    auto it = doc_.find(frame);
    if (it == doc_.end()) {
        std::lock_guard lock(warn_mutex_);
        warnings_.push_back("sidecar: no detections recorded for frame " + std::to_string(frame));
        return {};
    }
    return it->second;
}

ProbMask SidecarBackend::segment_box(int frame, const Box& box) const
{
    auto it = doc_.find(frame);
    if (it == doc_.end() || it->second.empty()) {
        throw BackendError("sidecar: no masks recorded for frame " + std::to_string(frame));
    }
    int best = -1;
    double best_iou = -1.0;
    for (std::size_t k = 0; k < it->second.size(); ++k) {
        const double v = box_iou(box, it->second[k].bbox);
        if (v > best_iou) {
            best_iou = v;
            best = static_cast<int>(k);
        }
    }
    const auto path = dir_ / sidecar_mask_name(frame, best);
    if (!std::filesystem::exists(path)) {
        throw BackendError("sidecar: missing mask " + path.filename().string());
    }
    const Image img = read_pnm(path);
    if (img.width != size_.width || img.height != size_.height) {
        throw SidecarFormatError("sidecar: mask " + path.filename().string() + " is " +
                                 std::to_string(img.width) + "x" + std::to_string(img.height) +
                                 ", shot frames are " + std::to_string(size_.width) + "x" +
                                 std::to_string(size_.height));
    }
    return image_to_prob(img);
}

ProbMask SidecarBackend::segment_points(int, std::span<const Point>, std::span<const Point>) const
{
    throw BackendError("sidecar: point prompts need a live segmentation model");
}

std::vector<std::string> SidecarBackend::warnings() const
{
    std::lock_guard lock(warn_mutex_);
    return warnings_;
}

}  // namespace maskpipe
