// Copyright 2026 The maskpipe Authors
// SPDX-License-Identifier: Apache-2.0

// Independent reference implementations and fixtures shared by the tests.
// Nothing here calls into the library's metric code.

#pragma once

#include "maskpipe/mask.hpp"
#include "maskpipe/synthetic.hpp"
#include "maskpipe/tracking.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace maskpipe::testing {

// Pixel-count oracles over plain nested loops.
inline long count_true(const BinaryMask& m)
{
    long n = 0;
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            n += m.at(x, y) != 0 ? 1 : 0;
        }
    }
    return n;
}

inline long count_both(const BinaryMask& a, const BinaryMask& b)
{
    long n = 0;
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            n += (a.at(x, y) != 0 && b.at(x, y) != 0) ? 1 : 0;
        }
    }
    return n;
}

inline long count_either(const BinaryMask& a, const BinaryMask& b)
{
    long n = 0;
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            n += (a.at(x, y) != 0 || b.at(x, y) != 0) ? 1 : 0;
        }
    }
    return n;
}

inline double oracle_sim(const BinaryMask& a, const BinaryMask& b)
{
    return static_cast<double>(count_both(a, b)) / static_cast<double>(count_true(a));
}

inline double oracle_iou(const BinaryMask& a, const BinaryMask& b)
{
    return static_cast<double>(count_both(a, b)) / static_cast<double>(count_either(a, b));
}

inline BinaryMask rect_mask(int w, int h, int x0, int y0, int x1, int y1)
{
    BinaryMask m(w, h, 0);
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            m.at(x, y) = 1;
        }
    }
    return m;
}

inline ProbMask rect_prob(int w, int h, int x0, int y0, int x1, int y1, float p)
{
    ProbMask m(w, h, 0.0f);
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            m.at(x, y) = p;
        }
    }
    return m;
}

inline BinaryMask or_masks(const BinaryMask& a, const BinaryMask& b)
{
    BinaryMask m(a.width(), a.height(), 0);
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            m.at(x, y) = (a.at(x, y) != 0 || b.at(x, y) != 0) ? 1 : 0;
        }
    }
    return m;
}

// Random mask: a few random rectangles, or salt noise at a random density.
inline BinaryMask random_mask(std::mt19937_64& rng, int w, int h, bool allow_empty = false)
{
    std::uniform_int_distribution<int> kind(0, 1);
    BinaryMask m(w, h, 0);
    do {
        if (kind(rng) == 0) {
            std::uniform_int_distribution<int> rx(0, w - 1);
            std::uniform_int_distribution<int> ry(0, h - 1);
            std::uniform_int_distribution<int> count(1, 3);
            for (int r = count(rng); r > 0; --r) {
                int x0 = rx(rng), x1 = rx(rng), y0 = ry(rng), y1 = ry(rng);
                if (x0 > x1) std::swap(x0, x1);
                if (y0 > y1) std::swap(y0, y1);
                for (int y = y0; y <= y1; ++y) {
                    for (int x = x0; x <= x1; ++x) {
                        m.at(x, y) = 1;
                    }
                }
            }
        } else {
            std::uniform_real_distribution<double> density(0.05, 0.9);
            std::bernoulli_distribution bit(density(rng));
            for (auto& v : m.data()) {
                v = bit(rng) ? 1 : 0;
            }
        }
    } while (!allow_empty && count_true(m) == 0);
    return m;
}

// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag)
    {
        static int counter = 0;
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("maskpipe-" + tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& sub) const { return path_ / sub; }

private:
    std::filesystem::path path_;
};

inline SceneObject moving_rect(std::string label, int appear, ShapeKey from, ShapeKey to, int disappear = -1)
{
    SceneObject o;
    o.label = std::move(label);
    o.shape = ShapeKind::Rectangle;
    o.appear = appear;
    o.disappear = disappear;
    o.keys = {from, to};
    return o;
}

// The three-object scene used by the end-to-end checks: two people crossing
// paths and a third entering late.
inline SceneSpec crossing_scene(int frames, std::uint64_t seed, const NoiseProfile& noise)
{
    SceneSpec s;
    s.id = "crossing";
    s.width = 128;
    s.height = 96;
    s.frame_count = frames;
    s.seed = seed;
    s.noise = noise;
    const int last = frames - 1;
    s.objects.push_back(moving_rect("person", 0, {0, 24, 48, 18, 44}, {last, 70, 50, 18, 44}));
    SceneObject ellipse;
    ellipse.label = "person";
    ellipse.shape = ShapeKind::Ellipse;
    ellipse.keys = {{0, 100, 46, 20, 48}, {last, 56, 44, 20, 48}};
    s.objects.push_back(ellipse);
    s.objects.push_back(moving_rect("person", std::min(20, last), {0, 108, 22, 16, 30}, {last, 96, 26, 16, 30}));
    return s;
}

// Ground-truth evaluation of finalized layers against a synthetic scene.
struct Evaluation {
    double mean_iou = 0.0;
    int visible_pairs = 0;
    int id_switches = 0;
    // For each object, the layer best matching it on each visible frame (0 if none).
    std::vector<std::vector<LayerId>> best_layer;
};

inline Evaluation evaluate(const SyntheticScene& scene, const std::vector<std::vector<std::pair<LayerId, BinaryMask>>>& frames)
{
    Evaluation ev;
    const int objects = scene.object_count();
    ev.best_layer.assign(static_cast<std::size_t>(objects), {});
    std::map<LayerId, std::set<int>> layer_objects;
    double total = 0.0;
    for (int f = 0; f < static_cast<int>(frames.size()); ++f) {
        for (int o = 0; o < objects; ++o) {
            const auto gt = scene.object_mask(f, o);
            if (count_true(gt) == 0) {
                ev.best_layer[static_cast<std::size_t>(o)].push_back(0);
                continue;
            }
            double best = 0.0;
            LayerId best_id = 0;
            for (const auto& [id, m] : frames[static_cast<std::size_t>(f)]) {
                if (count_either(gt, m) == 0) {
                    continue;
                }
                const double v = oracle_iou(gt, m);
                if (v > best) {
                    best = v;
                    best_id = id;
                }
            }
            total += best;
            ++ev.visible_pairs;
            // Identity needs a majority overlap; weaker matches only count towards IoU.
            if (best < 0.5) {
                best_id = 0;
            }
            ev.best_layer[static_cast<std::size_t>(o)].push_back(best_id);
            if (best_id != 0) {
                layer_objects[best_id].insert(o);
            }
        }
    }
    ev.mean_iou = ev.visible_pairs > 0 ? total / ev.visible_pairs : 1.0;
    for (const auto& [id, objs] : layer_objects) {
        ev.id_switches += static_cast<int>(objs.size()) - 1;
    }
    return ev;
}

inline std::vector<std::vector<std::pair<LayerId, BinaryMask>>> cache_masks(const MaskCache& cache, double tau = 0.5)
{
    std::vector<std::vector<std::pair<LayerId, BinaryMask>>> out;
    for (const auto& f : cache.frames) {
        std::map<LayerId, BinaryMask> layers;
        for (int y = 0; y < f.height(); ++y) {
            for (int x = 0; x < f.width(); ++x) {
                const auto id = f.ids.at(x, y);
                if (id != 0 && f.probs.at(x, y) >= tau) {
                    auto it = layers.try_emplace(id, f.width(), f.height(), std::uint8_t{0}).first;
                    it->second.at(x, y) = 1;
                }
            }
        }
        out.emplace_back(layers.begin(), layers.end());
    }
    return out;
}

}  // namespace maskpipe::testing
