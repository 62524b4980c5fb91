// Copyright 2026 The maskpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "maskpipe/synthetic.hpp"

#include "json.hpp"

#include <algorithm>
#include <climits>
#include <cmath>

namespace maskpipe {

using nlohmann::json;

namespace {

enum Purpose : std::uint64_t {
    kMiss = 1,
    kDuplicate = 2,
    kMergedFalsePositive = 3,
    kJitter = 4,
};

std::uint64_t splitmix(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

const char* shape_name(ShapeKind k)
{
    return k == ShapeKind::Ellipse ? "ellipse" : "rectangle";
}

ShapeKind parse_shape(const std::string& s)
{
    if (s == "rectangle" || s == "rect") {
        return ShapeKind::Rectangle;
    }
    if (s == "ellipse") {
        return ShapeKind::Ellipse;
    }
    throw std::invalid_argument("scene: unknown shape '" + s + "'");
}

void rasterize(ShapeKind kind, double cx, double cy, double w, double h, BinaryMask& out)
{
    if (w <= 0 || h <= 0) {
        return;
    }
    const int xa = std::max(0, static_cast<int>(std::floor(cx - w / 2)) - 1);
    const int xb = std::min(out.width() - 1, static_cast<int>(std::ceil(cx + w / 2)) + 1);
    const int ya = std::max(0, static_cast<int>(std::floor(cy - h / 2)) - 1);
    const int yb = std::min(out.height() - 1, static_cast<int>(std::ceil(cy + h / 2)) + 1);
    for (int y = ya; y <= yb; ++y) {
        const double py = y + 0.5;
        for (int x = xa; x <= xb; ++x) {
            const double px = x + 0.5;
            bool inside = false;
            if (kind == ShapeKind::Rectangle) {
                inside = px >= cx - w / 2 && px < cx + w / 2 && py >= cy - h / 2 && py < cy + h / 2;
            } else {
                const double u = (px - cx) / (w / 2);
                const double v = (py - cy) / (h / 2);
                inside = u * u + v * v <= 1.0;
            }
            if (inside) {
                out.at(x, y) = 1;
            }
        }
    }
}

}  // namespace

SceneSpec parse_scene_spec(const std::string& json_text)
{
    SceneSpec spec;
    try {
        const json j = json::parse(json_text);
        spec.id = j.value("id", spec.id);
        spec.width = j.at("width").get<int>();
        spec.height = j.at("height").get<int>();
        spec.frame_count = j.at("frames").get<int>();
        spec.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("noise")) {
            const auto& n = j.at("noise");
            spec.noise.duplicate_rate = n.value("duplicate_rate", 0.0);
            spec.noise.merged_false_positive_rate = n.value("merged_false_positive_rate", 0.0);
            spec.noise.miss_rate = n.value("miss_rate", 0.0);
            spec.noise.boundary_jitter_px = n.value("boundary_jitter_px", 0);
            spec.noise.tracker_confidence_decay = n.value("tracker_confidence_decay", 0.0);
        }
        for (const auto& o : j.value("objects", json::array())) {
            SceneObject obj;
            obj.label = o.value("label", obj.label);
            obj.shape = parse_shape(o.value("shape", std::string("rectangle")));
            obj.appear = o.value("appear", 0);
            obj.disappear = o.value("disappear", -1);
            for (const auto& k : o.at("keys")) {
                obj.keys.push_back(ShapeKey{k.value("frame", 0), k.at("cx").get<double>(), k.at("cy").get<double>(),
                                            k.at("w").get<double>(), k.at("h").get<double>()});
            }
            for (const auto& p : o.value("parts", json::array())) {
                obj.parts.push_back(ObjectPart{p.value("name", std::string("part")),
                                               parse_shape(p.value("shape", std::string("rectangle"))),
                                               p.at("dx").get<double>(), p.at("dy").get<double>(),
                                               p.at("w").get<double>(), p.at("h").get<double>()});
            }
            spec.objects.push_back(std::move(obj));
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("scene: malformed spec: ") + e.what());
    }
    return spec;
}

std::string scene_spec_to_json(const SceneSpec& spec)
{
    json j;
    j["id"] = spec.id;
    j["width"] = spec.width;
    j["height"] = spec.height;
    j["frames"] = spec.frame_count;
    j["seed"] = spec.seed;
    j["noise"] = {{"duplicate_rate", spec.noise.duplicate_rate},
                  {"merged_false_positive_rate", spec.noise.merged_false_positive_rate},
                  {"miss_rate", spec.noise.miss_rate},
                  {"boundary_jitter_px", spec.noise.boundary_jitter_px},
                  {"tracker_confidence_decay", spec.noise.tracker_confidence_decay}};
    json objects = json::array();
    for (const auto& o : spec.objects) {
        json jo{{"label", o.label}, {"shape", shape_name(o.shape)}, {"appear", o.appear},
                {"disappear", o.disappear}};
        json keys = json::array();
        for (const auto& k : o.keys) {
            keys.push_back({{"frame", k.frame}, {"cx", k.cx}, {"cy", k.cy}, {"w", k.w}, {"h", k.h}});
        }
        jo["keys"] = keys;
        json parts = json::array();
        for (const auto& p : o.parts) {
            parts.push_back({{"name", p.name}, {"shape", shape_name(p.shape)}, {"dx", p.dx}, {"dy", p.dy},
                             {"w", p.w}, {"h", p.h}});
        }
        jo["parts"] = parts;
        objects.push_back(jo);
    }
    j["objects"] = objects;
    return j.dump(2) + "\n";
}

SyntheticScene::SyntheticScene(SceneSpec spec) : spec_(std::move(spec))
{
    if (spec_.width < 1 || spec_.height < 1 || spec_.frame_count < 1) {
        throw std::invalid_argument("scene: dimensions and frame count must be positive");
    }
    if (spec_.objects.size() >= 0xffff) {
        throw std::invalid_argument("scene: too many objects");
    }
    for (auto& o : spec_.objects) {
        if (o.keys.empty()) {
            throw std::invalid_argument("scene: object '" + o.label + "' has no keys");
        }
        std::stable_sort(o.keys.begin(), o.keys.end(),
                         [](const ShapeKey& a, const ShapeKey& b) { return a.frame < b.frame; });
    }
    labels_.reserve(static_cast<std::size_t>(spec_.frame_count));
    for (int f = 0; f < spec_.frame_count; ++f) {
        Grid<std::uint16_t> lab(spec_.width, spec_.height, 0);
        for (int i = 0; i < object_count(); ++i) {
            if (!active(f, i)) {
                continue;
            }
            const auto m = shape_mask(f, i, true);
            for (std::size_t p = 0; p < m.size(); ++p) {
                if (m[p]) {
                    lab[p] = static_cast<std::uint16_t>(i + 1);
                }
            }
        }
        labels_.push_back(std::move(lab));
    }
}

void SyntheticScene::check_frame(int frame) const
{
    if (frame < 0 || frame >= spec_.frame_count) {
        throw std::out_of_range("scene: frame " + std::to_string(frame) + " out of range");
    }
}

bool SyntheticScene::active(int frame, int object) const
{
    const auto& o = spec_.objects[static_cast<std::size_t>(object)];
    return frame >= o.appear && (o.disappear < 0 || frame < o.disappear);
}

ShapeKey SyntheticScene::placement(int frame, int object) const
{
    const auto& keys = spec_.objects[static_cast<std::size_t>(object)].keys;
    if (frame <= keys.front().frame) {
        return keys.front();
    }
    if (frame >= keys.back().frame) {
        return keys.back();
    }
    for (std::size_t k = 1; k < keys.size(); ++k) {
        if (frame <= keys[k].frame) {
            const auto& a = keys[k - 1];
            const auto& b = keys[k];
            const double t = static_cast<double>(frame - a.frame) / static_cast<double>(b.frame - a.frame);
            return ShapeKey{frame, a.cx + t * (b.cx - a.cx), a.cy + t * (b.cy - a.cy), a.w + t * (b.w - a.w),
                            a.h + t * (b.h - a.h)};
        }
    }
    return keys.back();
}

BinaryMask SyntheticScene::shape_mask(int frame, int object, bool with_parts) const
{
    BinaryMask m(spec_.width, spec_.height, 0);
    const auto& o = spec_.objects[static_cast<std::size_t>(object)];
    const auto p = placement(frame, object);
    rasterize(o.shape, p.cx, p.cy, p.w, p.h, m);
    if (with_parts) {
        for (const auto& part : o.parts) {
            rasterize(part.shape, p.cx + part.dx, p.cy + part.dy, part.w, part.h, m);
        }
    }
    return m;
}

BinaryMask SyntheticScene::part_mask(int frame, int object, std::size_t part) const
{
    BinaryMask m(spec_.width, spec_.height, 0);
    const auto& o = spec_.objects[static_cast<std::size_t>(object)];
    const auto p = placement(frame, object);
    const auto& pt = o.parts.at(part);
    rasterize(pt.shape, p.cx + pt.dx, p.cy + pt.dy, pt.w, pt.h, m);
    const auto body = shape_mask(frame, object, false);
    for (std::size_t i = 0; i < m.size(); ++i) {
        m[i] = m[i] && !body[i] ? 1 : 0;
    }
    return m;
}

const Grid<std::uint16_t>& SyntheticScene::label_image(int frame) const
{
    check_frame(frame);
    return labels_[static_cast<std::size_t>(frame)];
}

BinaryMask SyntheticScene::object_mask(int frame, int object) const
{
    const auto& lab = label_image(frame);
    BinaryMask m(spec_.width, spec_.height, 0);
    const auto want = static_cast<std::uint16_t>(object + 1);
    for (std::size_t i = 0; i < m.size(); ++i) {
        m[i] = lab[i] == want ? 1 : 0;
    }
    return m;
}

bool SyntheticScene::visible(int frame, int object) const
{
    const auto& lab = label_image(frame);
    const auto want = static_cast<std::uint16_t>(object + 1);
    return std::find(lab.data().begin(), lab.data().end(), want) != lab.data().end();
}

double SyntheticScene::roll(int frame, std::uint64_t a, std::uint64_t b, std::uint64_t purpose) const
{
    std::uint64_t h = splitmix(spec_.seed);
    h = splitmix(h ^ static_cast<std::uint64_t>(frame));
    h = splitmix(h ^ a);
    h = splitmix(h ^ b);
    h = splitmix(h ^ (purpose * 0x632be59bd9b4e019ULL));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

std::vector<Detection> SyntheticScene::detect(int frame, std::string_view prompt) const
{
    check_frame(frame);
    std::vector<Detection> out;
    for (const auto& sub : split_prompt(prompt)) {
        std::vector<int> matching;
        std::vector<Box> boxes;
        for (int i = 0; i < object_count(); ++i) {
            if (spec_.objects[static_cast<std::size_t>(i)].label == sub && visible(frame, i)) {
                matching.push_back(i);
                boxes.push_back(bounding_box(object_mask(frame, i)));
            }
        }
        for (std::size_t k = 0; k < matching.size(); ++k) {
            const auto obj = static_cast<std::uint64_t>(matching[k]);
            if (roll(frame, obj, 0, kMiss) < spec_.noise.miss_rate) {
                continue;
            }
            out.push_back(Detection{boxes[k], 1.0, sub});
            if (roll(frame, obj, 0, kDuplicate) < spec_.noise.duplicate_rate) {
                out.push_back(Detection{boxes[k], 0.9, sub});
            }
        }
        for (std::size_t a = 0; a < matching.size(); ++a) {
            for (std::size_t b = a + 1; b < matching.size(); ++b) {
                const Box inter{std::max(boxes[a].x0, boxes[b].x0), std::max(boxes[a].y0, boxes[b].y0),
                                std::min(boxes[a].x1, boxes[b].x1), std::min(boxes[a].y1, boxes[b].y1)};
                if (inter.area() <= 0) {
                    continue;
                }
                if (roll(frame, static_cast<std::uint64_t>(matching[a]), static_cast<std::uint64_t>(matching[b]),
                         kMergedFalsePositive) < spec_.noise.merged_false_positive_rate) {
                    out.push_back(Detection{boxes[a].united(boxes[b]), 0.5, sub});
                }
            }
        }
    }
    return out;
}

BinaryMask SyntheticScene::jitter(const BinaryMask& mask, int frame, std::uint64_t salt) const
{
    const int r = spec_.noise.boundary_jitter_px;
    if (r <= 0) {
        return mask;
    }
    BinaryMask out = mask;
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            const auto self = mask.at(x, y);
            bool band = false;
            for (int dy = -r; dy <= r && !band; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    const int nx = x + dx;
                    const int ny = y + dy;
                    if (mask.contains(nx, ny) && mask.at(nx, ny) != self) {
                        band = true;
                        break;
                    }
                }
            }
            if (band) {
                const auto idx = static_cast<std::uint64_t>(y) * static_cast<std::uint64_t>(mask.width()) +
                                 static_cast<std::uint64_t>(x);
                out.at(x, y) = roll(frame, salt, idx, kJitter) < 0.5 ? 1 : 0;
            }
        }
    }
    return out;
}

ProbMask confidence_ramp(const BinaryMask& mask, int ramp_px)
{
    const int w = mask.width();
    const int h = mask.height();
    constexpr int kInf = INT_MAX / 2;
    Grid<int> dist(w, h, kInf);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) {
            dist[i] = 0;
        }
    }
    // Two-pass chessboard distance transform.
    auto relax = [&](int x, int y, int nx, int ny) {
        if (dist.contains(nx, ny)) {
            dist.at(x, y) = std::min(dist.at(x, y), dist.at(nx, ny) + 1);
        }
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            relax(x, y, x - 1, y);
            relax(x, y, x - 1, y - 1);
            relax(x, y, x, y - 1);
            relax(x, y, x + 1, y - 1);
        }
    }
    for (int y = h - 1; y >= 0; --y) {
        for (int x = w - 1; x >= 0; --x) {
            relax(x, y, x + 1, y);
            relax(x, y, x + 1, y + 1);
            relax(x, y, x, y + 1);
            relax(x, y, x - 1, y + 1);
        }
    }
    ProbMask out(w, h, 0.0f);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) {
            continue;
        }
        const int d = dist[i];
        if (d >= kInf || ramp_px <= 0) {
            out[i] = 1.0f;
            continue;
        }
        const double t = std::min(d - 1, ramp_px) / static_cast<double>(ramp_px);
        out[i] = static_cast<float>(0.5 + 0.5 * t);
    }
    return out;
}

ProbMask SyntheticScene::segment_box(int frame, const Box& box) const
{
    check_frame(frame);
    const Box b = box.clamped(spec_.width, spec_.height);
    ProbMask empty(spec_.width, spec_.height, 0.0f);
    if (!b.valid()) {
        return empty;
    }
    std::vector<int> objs;
    std::vector<Box> boxes;
    for (int i = 0; i < object_count(); ++i) {
        if (visible(frame, i)) {
            objs.push_back(i);
            boxes.push_back(bounding_box(object_mask(frame, i)));
        }
    }
    int best = -1;
    double best_iou = 0.0;
    for (std::size_t k = 0; k < objs.size(); ++k) {
        const double v = box_iou(b, boxes[k]);
        if (v > best_iou) {
            best_iou = v;
            best = static_cast<int>(k);
        }
    }
    if (best < 0) {
        return empty;
    }

    // A box spanning two instances yields a mask covering both of them.
    constexpr double kUnionMatch = 0.9;
    if (best_iou < kUnionMatch) {
        double best_pair = kUnionMatch;
        int pa = -1;
        int pb = -1;
        for (std::size_t a = 0; a < objs.size(); ++a) {
            for (std::size_t c = a + 1; c < objs.size(); ++c) {
                const double v = box_iou(b, boxes[a].united(boxes[c]));
                if (v >= best_pair) {
                    best_pair = v;
                    pa = static_cast<int>(a);
                    pb = static_cast<int>(c);
                }
            }
        }
        if (pa >= 0) {
            auto m = united(object_mask(frame, objs[static_cast<std::size_t>(pa)]),
                            object_mask(frame, objs[static_cast<std::size_t>(pb)]));
            const auto salt = 0x10000ULL + static_cast<std::uint64_t>(objs[static_cast<std::size_t>(pa)]) * 0x100ULL +
                              static_cast<std::uint64_t>(objs[static_cast<std::size_t>(pb)]);
            return confidence_ramp(jitter(m, frame, salt));
        }
    }
    const int obj = objs[static_cast<std::size_t>(best)];
    return confidence_ramp(jitter(object_mask(frame, obj), frame, static_cast<std::uint64_t>(obj)));
}

ProbMask SyntheticScene::segment_points(int frame, std::span<const Point> positive,
                                        std::span<const Point> negative) const
{
    check_frame(frame);
    for (const auto* set : {&positive, &negative}) {
        for (const auto& p : *set) {
            if (p.x < 0 || p.y < 0 || p.x >= spec_.width || p.y >= spec_.height) {
                throw std::out_of_range("segment_points: point (" + std::to_string(p.x) + "," +
                                        std::to_string(p.y) + ") outside frame");
            }
        }
    }
    const auto& lab = label_image(frame);
    std::vector<int> votes(static_cast<std::size_t>(object_count()) + 1, 0);
    for (const auto& p : positive) {
        ++votes[lab.at(p.x, p.y)];
    }
    int winner = -1;
    int most = 0;
    for (std::size_t i = 1; i < votes.size(); ++i) {
        if (votes[i] > most) {
            most = votes[i];
            winner = static_cast<int>(i) - 1;
        }
    }
    if (winner < 0) {
        return ProbMask(spec_.width, spec_.height, 0.0f);
    }
    auto mask = jitter(object_mask(frame, winner), frame, 0x20000ULL + static_cast<std::uint64_t>(winner));
    const auto& parts = spec_.objects[static_cast<std::size_t>(winner)].parts;
    constexpr int kNegativeRadius = 4;
    for (const auto& n : negative) {
        bool on_part = false;
        for (std::size_t k = 0; k < parts.size(); ++k) {
            const auto region = part_mask(frame, winner, k);
            if (region.at(n.x, n.y)) {
                on_part = true;
                for (std::size_t i = 0; i < mask.size(); ++i) {
                    if (region[i]) {
                        mask[i] = 0;
                    }
                }
            }
        }
        if (!on_part) {
            for (int dy = -kNegativeRadius; dy <= kNegativeRadius; ++dy) {
                for (int dx = -kNegativeRadius; dx <= kNegativeRadius; ++dx) {
                    if (dx * dx + dy * dy <= kNegativeRadius * kNegativeRadius &&
                        mask.contains(n.x + dx, n.y + dy)) {
                        mask.at(n.x + dx, n.y + dy) = 0;
                    }
                }
            }
        }
    }
    return confidence_ramp(mask);
}

std::vector<TrackerPrediction> SyntheticScene::track(std::span<const int> frames,
                                                     const std::map<LayerId, BinaryMask>& prompt) const
{
    std::vector<TrackerPrediction> out;
    if (frames.empty()) {
        return out;
    }
    const int start = frames.front();
    check_frame(start);
    std::map<LayerId, int> matched;
    for (const auto& [id, pm] : prompt) {
        if (pm.width() != spec_.width || pm.height() != spec_.height) {
            throw DimensionMismatch("synthetic track: prompt dimensions differ from scene");
        }
        int best = -1;
        double best_iou = 0.0;
        if (area(pm) > 0) {
            for (int i = 0; i < object_count(); ++i) {
                if (!visible(start, i)) {
                    continue;
                }
                const double v = iou(pm, object_mask(start, i));
                if (v > best_iou) {
                    best_iou = v;
                    best = i;
                }
            }
        }
        matched[id] = best;
    }
    for (std::size_t k = 0; k < frames.size(); ++k) {
        const int f = frames[k];
        check_frame(f);
        TrackerPrediction pred{f, {}};
        const double conf =
            std::max(0.0, kTrackerStartConfidence - spec_.noise.tracker_confidence_decay * static_cast<double>(k));
        for (const auto& [id, obj] : matched) {
            ProbMask pm(spec_.width, spec_.height, 0.0f);
            if (obj >= 0) {
                const auto& lab = label_image(f);
                const auto want = static_cast<std::uint16_t>(obj + 1);
                for (std::size_t i = 0; i < pm.size(); ++i) {
                    if (lab[i] == want) {
                        pm[i] = static_cast<float>(conf);
                    }
                }
            }
            pred.per_layer.emplace(id, std::move(pm));
        }
        out.push_back(std::move(pred));
    }
    return out;
}

Image SyntheticScene::render(int frame) const
{
    static constexpr std::uint8_t kPalette[][3] = {
        {220, 90, 70}, {80, 160, 220}, {120, 200, 90}, {230, 190, 60}, {170, 100, 210}, {90, 210, 190},
    };
    const auto& lab = label_image(frame);
    Image img(spec_.width, spec_.height, 3, 255);
    for (int y = 0; y < spec_.height; ++y) {
        for (int x = 0; x < spec_.width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * static_cast<std::size_t>(spec_.width) +
                                  static_cast<std::size_t>(x);
            const auto l = lab[i];
            std::uint16_t rgb[3];
            if (l == 0) {
                const auto g = static_cast<std::uint16_t>(30 + (40 * y) / std::max(1, spec_.height));
                rgb[0] = rgb[1] = rgb[2] = g;
            } else {
                const auto* c = kPalette[(l - 1) % (sizeof kPalette / sizeof kPalette[0])];
                rgb[0] = c[0];
                rgb[1] = c[1];
                rgb[2] = c[2];
            }
            for (int c = 0; c < 3; ++c) {
                img.samples[i * 3 + static_cast<std::size_t>(c)] = rgb[c];
            }
        }
    }
    return img;
}

}  // namespace maskpipe
