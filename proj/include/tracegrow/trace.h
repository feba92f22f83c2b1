#pragma once

#include <tracegrow/image.h>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tracegrow {

enum class Tool { Pencil, Line, Eraser };

std::string_view toString(Tool tool) noexcept;
std::optional<Tool> parseTool(std::string_view name) noexcept;

struct Point {
    int x = 0;
    int y = 0;

    friend bool operator==(const Point&, const Point&) = default;
};

/// Brush sizes offered by the drawing tools, in pixels.
inline constexpr int kThicknesses[] = {1, 2, 4, 8};

struct Stroke {
    Tool tool = Tool::Pencil;
    std::uint8_t category = 0;  ///< ignored by the eraser
    int thickness = 1;
    std::vector<Point> points;

    /// Throws InvalidThickness or DegenerateStroke.
    void validate() const;

    friend bool operator==(const Stroke&, const Stroke&) = default;
};

/// Integer line from a to b, both endpoints included.
std::vector<Point> bresenham(Point a, Point b);

/// Draws `stroke` onto `raster` in place. Points are clamped to the raster;
/// every path pixel is dilated by a thickness x thickness square anchored at
/// its top-left corner. The eraser writes kUnlabeled.
void applyStroke(TraceRaster& raster, const Stroke& stroke);

TraceRaster rasterizeStroke(TraceRaster raster, const Stroke& stroke);

/// Replays strokes in order onto an all-unlabeled raster.
TraceRaster rasterFromStrokes(int width, int height, std::span<const Stroke> strokes);

/// Versioned stroke-list document:
///   {"version": 1, "strokes": [{"tool": "pencil", "category": 1,
///                               "thickness": 2, "points": [[x, y], ...]}]}
inline constexpr int kStrokeListVersion = 1;

std::vector<Stroke> parseStrokeList(std::string_view text);
std::string serializeStrokeList(std::span<const Stroke> strokes);

/// Category colours. Index = category id; kUnlabeled renders with voidColor.
class Palette {
public:
    Palette() = default;
    explicit Palette(std::vector<Rgb> colors, Rgb voidColor = Rgb{224, 224, 192});

    /// The PASCAL VOC colour map. The first 21 entries are the VOC classes
    /// (background + 20 objects); the map stays collision-free up to 255.
    static Palette pascalVoc(int categories = 21);

    std::size_t size() const noexcept { return colors_.size(); }
    const std::vector<Rgb>& colors() const noexcept { return colors_; }
    Rgb color(std::uint8_t category) const;
    Rgb voidColor() const noexcept { return void_; }

    bool accepts(std::uint8_t value) const noexcept {
        return value == kUnlabeled || value < colors_.size();
    }

private:
    std::vector<Rgb> colors_;
    Rgb void_{224, 224, 192};
};

} // namespace tracegrow
