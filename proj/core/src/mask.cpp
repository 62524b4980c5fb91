// Copyright 2026 The maskpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "maskpipe/mask.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace maskpipe {

Box Box::clamped(int w, int h) const
{
    return Box{std::clamp(x0, 0.0, static_cast<double>(w)), std::clamp(y0, 0.0, static_cast<double>(h)),
               std::clamp(x1, 0.0, static_cast<double>(w)), std::clamp(y1, 0.0, static_cast<double>(h))};
}

Box Box::united(const Box& o) const
{
    return Box{std::min(x0, o.x0), std::min(y0, o.y0), std::max(x1, o.x1), std::max(y1, o.y1)};
}

double box_iou(const Box& a, const Box& b)
{
    const Box inter{std::max(a.x0, b.x0), std::max(a.y0, b.y0), std::min(a.x1, b.x1),
                    std::min(a.y1, b.y1)};
    const double i = inter.area();
    const double u = a.area() + b.area() - i;
    return u > 0 ? i / u : 0.0;
}

std::size_t area(const BinaryMask& m)
{
    std::size_t n = 0;
    for (auto v : m.data()) {
        n += v != 0;
    }
    return n;
}

std::size_t intersection_area(const BinaryMask& a, const BinaryMask& b)
{
    require_same_shape(a, b, "intersection_area");
    const auto& da = a.data();
    const auto& db = b.data();
    std::size_t n = 0;
    for (std::size_t i = 0; i < da.size(); ++i) {
        n += (da[i] != 0) & (db[i] != 0);
    }
    return n;
}

double sim_asym(const BinaryMask& a, const BinaryMask& b)
{
    require_same_shape(a, b, "sim_asym");
    const std::size_t na = area(a);
    if (na == 0) {
        throw std::domain_error("sim_asym: first mask is empty");
    }
    return static_cast<double>(intersection_area(a, b)) / static_cast<double>(na);
}

double iou(const BinaryMask& a, const BinaryMask& b)
{
    require_same_shape(a, b, "iou");
    const auto& da = a.data();
    const auto& db = b.data();
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (std::size_t i = 0; i < da.size(); ++i) {
        const bool pa = da[i] != 0;
        const bool pb = db[i] != 0;
        inter += pa && pb;
        uni += pa || pb;
    }
    if (uni == 0) {
        throw std::domain_error("iou: both masks are empty");
    }
    return static_cast<double>(inter) / static_cast<double>(uni);
}

BinaryMask binarize(const ProbMask& p, double tau)
{
    BinaryMask out(p.width(), p.height());
    const auto& src = p.data();
    auto& dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = static_cast<double>(src[i]) >= tau ? 1 : 0;
    }
    return out;
}

void unite_into(BinaryMask& dst, const BinaryMask& src)
{
    require_same_shape(dst, src, "unite");
    auto& d = dst.data();
    const auto& s = src.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] = (d[i] | s[i]) != 0 ? 1 : 0;
    }
}

BinaryMask united(const BinaryMask& a, const BinaryMask& b)
{
    BinaryMask out = a;
    unite_into(out, b);
    return out;
}

bool is_subset(const BinaryMask& a, const BinaryMask& b)
{
    require_same_shape(a, b, "is_subset");
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] && !b[i]) {
            return false;
        }
    }
    return true;
}

Box bounding_box(const BinaryMask& m)
{
    int x0 = std::numeric_limits<int>::max();
    int y0 = std::numeric_limits<int>::max();
    int x1 = -1;
    int y1 = -1;
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            if (m.at(x, y)) {
                x0 = std::min(x0, x);
                y0 = std::min(y0, y);
                x1 = std::max(x1, x);
                y1 = std::max(y1, y);
            }
        }
    }
    if (x1 < 0) {
        return Box{};
    }
    return Box{static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x1 + 1),
               static_cast<double>(y1 + 1)};
}

}  // namespace maskpipe
