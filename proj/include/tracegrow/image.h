#pragma once

#include <tracegrow/error.h>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tracegrow {

/// Category id reserved for "no label" in traces and "void" in ground truth.
inline constexpr std::uint8_t kUnlabeled = 255;

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct Lab {
    double L = 0.0;
    double a = 0.0;
    double b = 0.0;
};

/// Dense row-major 2-D grid of values.
template <class T>
class Plane {
public:
    using value_type = T;

    Plane() = default;

    Plane(int width, int height, T fill = T{}) : width_(width), height_(height) {
        if (width < 1 || height < 1) {
            throw Error(ErrorCode::InvalidArgument,
                        "plane dimensions must be positive, got " +
                            std::to_string(width) + "x" + std::to_string(height));
        }
        data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
    }

    Plane(int width, int height, std::vector<T> data)
        : width_(width), height_(height), data_(std::move(data)) {
        if (width < 1 || height < 1 ||
            data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
            throw Error(ErrorCode::InvalidArgument, "plane data does not match its dimensions");
        }
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    bool contains(int x, int y) const noexcept {
        return x >= 0 && y >= 0 && x < width_ && y < height_;
    }

    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    T& at(int x, int y) noexcept { return data_[index(x, y)]; }
    const T& at(int x, int y) const noexcept { return data_[index(x, y)]; }

    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }

    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }

    template <class U>
    bool sameShape(const Plane<U>& other) const noexcept {
        return width_ == other.width() && height_ == other.height();
    }

    friend bool operator==(const Plane&, const Plane&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

using RgbImage = Plane<Rgb>;
using LabColorPlane = Plane<Lab>;

/// Per-pixel category ids drawn by the annotator; kUnlabeled where nothing was drawn.
class TraceRaster : public Plane<std::uint8_t> {
public:
    using Plane::Plane;
    TraceRaster(int width, int height) : Plane(width, height, kUnlabeled) {}
    explicit TraceRaster(Plane<std::uint8_t> plane) : Plane(std::move(plane)) {}

    std::size_t labeledCount() const noexcept;
};

/// Dense per-pixel category ids.
class LabelMask : public Plane<std::uint8_t> {
public:
    using Plane::Plane;
    explicit LabelMask(Plane<std::uint8_t> plane) : Plane(std::move(plane)) {}
};

template <class A, class B>
void requireSameShape(const Plane<A>& a, const Plane<B>& b, const char* what) {
    if (!a.sameShape(b)) {
        throw Error(ErrorCode::DimensionMismatch,
                    std::string(what) + ": " + std::to_string(a.width()) + "x" +
                        std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                        std::to_string(b.height()));
    }
}

} // namespace tracegrow
