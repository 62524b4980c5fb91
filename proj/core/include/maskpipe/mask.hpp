// Copyright 2026 The maskpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace maskpipe {

/// Row-major 2D grid of pixel values. Dimensions are fixed at construction.
template <typename T>
class Grid {
public:
    using value_type = T;

    Grid() = default;
    Grid(int width, int height, T fill = T{})
        : width_(width), height_(height)
    {
        if (width < 1 || height < 1) {
            throw std::invalid_argument("grid dimensions must be positive, got " +
                                        std::to_string(width) + "x" + std::to_string(height));
        }
        data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
    }

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return data_.size(); }
    bool empty_grid() const { return data_.empty(); }

    T& at(int x, int y) { return data_[index(x, y)]; }
    const T& at(int x, int y) const { return data_[index(x, y)]; }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

    std::vector<T>& data() { return data_; }
    const std::vector<T>& data() const { return data_; }

    template <typename U>
    bool same_shape(const Grid<U>& other) const
    {
        return width_ == other.width() && height_ == other.height();
    }

    bool operator==(const Grid&) const = default;

private:
    std::size_t index(int x, int y) const
    {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

/// One byte per pixel, 0 or 1.
using BinaryMask = Grid<std::uint8_t>;
/// Per-pixel probabilities in [0,1].
using ProbMask = Grid<float>;

class DimensionMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

template <typename A, typename B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, const char* what)
{
    if (!a.same_shape(b)) {
        throw DimensionMismatch(std::string(what) + ": dimension mismatch " +
                                std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                                " vs " + std::to_string(b.width()) + "x" +
                                std::to_string(b.height()));
    }
}

/// Half-open pixel rectangle [x0,x1) x [y0,y1).
struct Box {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    double area() const { return width() > 0 && height() > 0 ? width() * height() : 0.0; }
    bool valid() const { return x0 < x1 && y0 < y1; }
    Box clamped(int w, int h) const;
    Box united(const Box& o) const;

    bool operator==(const Box&) const = default;
};

double box_iou(const Box& a, const Box& b);

std::size_t area(const BinaryMask& m);
std::size_t intersection_area(const BinaryMask& a, const BinaryMask& b);

/// Fraction of `a` covered by `b`: |a∩b| / |a|. Not symmetric.
/// Throws on mismatched dimensions or an empty `a`.
double sim_asym(const BinaryMask& a, const BinaryMask& b);

/// |a∩b| / |a∪b|. Throws if both masks are empty.
double iou(const BinaryMask& a, const BinaryMask& b);

/// Pixel is set iff prob >= tau.
BinaryMask binarize(const ProbMask& p, double tau = 0.5);

void unite_into(BinaryMask& dst, const BinaryMask& src);
BinaryMask united(const BinaryMask& a, const BinaryMask& b);
bool is_subset(const BinaryMask& a, const BinaryMask& b);

/// Tight bounding box of set pixels; invalid box when the mask is empty.
Box bounding_box(const BinaryMask& m);

/// Nearest-neighbour resample to the given dimensions.
template <typename T>
Grid<T> resample_nearest(const Grid<T>& src, int width, int height)
{
    if (src.width() == width && src.height() == height) {
        return src;
    }
    Grid<T> out(width, height);
    for (int y = 0; y < height; ++y) {
        const int sy = std::min(src.height() - 1,
                                static_cast<int>((static_cast<long long>(y) * src.height()) / height));
        for (int x = 0; x < width; ++x) {
            const int sx = std::min(src.width() - 1,
                                    static_cast<int>((static_cast<long long>(x) * src.width()) / width));
            out.at(x, y) = src.at(sx, sy);
        }
    }
    return out;
}

}  // namespace maskpipe
