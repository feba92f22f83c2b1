#include <tracegrow/trace.h>

#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <set>

namespace tracegrow {

namespace {

using nlohmann::json;

void stamp(TraceRaster& raster, Point p, int thickness, std::uint8_t value) {
    const int x1 = std::min(raster.width(), p.x + thickness);
    const int y1 = std::min(raster.height(), p.y + thickness);
    for (int y = p.y; y < y1; ++y) {
        for (int x = p.x; x < x1; ++x) {
            raster.at(x, y) = value;
        }
    }
}

Point clampTo(const TraceRaster& raster, Point p) {
    return Point{std::clamp(p.x, 0, raster.width() - 1), std::clamp(p.y, 0, raster.height() - 1)};
}

} // namespace

std::string_view toString(Tool tool) noexcept {
    switch (tool) {
        case Tool::Pencil: return "pencil";
        case Tool::Line:   return "line";
        case Tool::Eraser: return "eraser";
    }
    return "pencil";
}

std::optional<Tool> parseTool(std::string_view name) noexcept {
    if (name == "pencil") return Tool::Pencil;
    if (name == "line") return Tool::Line;
    if (name == "eraser") return Tool::Eraser;
    return std::nullopt;
}

void Stroke::validate() const {
    if (std::find(std::begin(kThicknesses), std::end(kThicknesses), thickness) ==
        std::end(kThicknesses)) {
        throw Error(ErrorCode::InvalidThickness,
                    "thickness must be 1, 2, 4 or 8, got " + std::to_string(thickness));
    }
    if (points.empty()) {
        throw Error(ErrorCode::DegenerateStroke, "stroke has no points");
    }
    if (tool == Tool::Line && points.size() != 2) {
        throw Error(ErrorCode::DegenerateStroke, "line stroke needs exactly two points");
    }
    if (tool != Tool::Eraser && category == kUnlabeled) {
        throw Error(ErrorCode::UnknownCategoryValue, "255 is reserved for unlabeled pixels");
    }
}

std::vector<Point> bresenham(Point a, Point b) {
    std::vector<Point> out;
    const int dx = std::abs(b.x - a.x);
    const int dy = -std::abs(b.y - a.y);
    const int sx = a.x < b.x ? 1 : -1;
    const int sy = a.y < b.y ? 1 : -1;
    int err = dx + dy;
    Point p = a;
    out.reserve(static_cast<std::size_t>(std::max(dx, -dy)) + 1);
    while (true) {
        out.push_back(p);
        if (p == b) {
            break;
        }
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            p.x += sx;
        }
        if (e2 <= dx) {
            err += dx;
            p.y += sy;
        }
    }
    return out;
}

void applyStroke(TraceRaster& raster, const Stroke& stroke) {
    stroke.validate();
    const std::uint8_t value = stroke.tool == Tool::Eraser ? kUnlabeled : stroke.category;

    if (stroke.points.size() == 1) {
        stamp(raster, clampTo(raster, stroke.points.front()), stroke.thickness, value);
        return;
    }
    for (std::size_t i = 1; i < stroke.points.size(); ++i) {
        const Point a = clampTo(raster, stroke.points[i - 1]);
        const Point b = clampTo(raster, stroke.points[i]);
        for (const Point p : bresenham(a, b)) {
            stamp(raster, p, stroke.thickness, value);
        }
    }
}

TraceRaster rasterizeStroke(TraceRaster raster, const Stroke& stroke) {
    applyStroke(raster, stroke);
    return raster;
}

TraceRaster rasterFromStrokes(int width, int height, std::span<const Stroke> strokes) {
    TraceRaster raster(width, height);
    for (const Stroke& s : strokes) {
        applyStroke(raster, s);
    }
    return raster;
}

std::vector<Stroke> parseStrokeList(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedStrokeList, std::string("stroke list: ") + e.what());
    }
    if (!doc.is_object() || doc.value("version", 0) != kStrokeListVersion ||
        !doc.contains("strokes") || !doc["strokes"].is_array()) {
        throw Error(ErrorCode::MalformedStrokeList,
                    "stroke list must be an object with version 1 and a strokes array");
    }

    std::vector<Stroke> strokes;
    try {
        for (const json& item : doc["strokes"]) {
            Stroke s;
            const auto tool = parseTool(item.at("tool").get<std::string>());
            if (!tool) {
                throw Error(ErrorCode::MalformedStrokeList,
                            "unknown tool " + item.at("tool").dump());
            }
            s.tool = *tool;
            const int category = item.value("category", 0);
            if (category < 0 || category > 255) {
                throw Error(ErrorCode::UnknownCategoryValue, "category out of 8-bit range");
            }
            s.category = static_cast<std::uint8_t>(category);
            s.thickness = item.at("thickness").get<int>();
            for (const json& pt : item.at("points")) {
                s.points.push_back(Point{pt.at(0).get<int>(), pt.at(1).get<int>()});
            }
            s.validate();
            strokes.push_back(std::move(s));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedStrokeList, std::string("stroke list: ") + e.what());
    }
    return strokes;
}

std::string serializeStrokeList(std::span<const Stroke> strokes) {
    json list = json::array();
    for (const Stroke& s : strokes) {
        json points = json::array();
        for (const Point& p : s.points) {
            points.push_back({p.x, p.y});
        }
        list.push_back({{"tool", toString(s.tool)},
                        {"category", s.category},
                        {"thickness", s.thickness},
                        {"points", std::move(points)}});
    }
    return json{{"version", kStrokeListVersion}, {"strokes", std::move(list)}}.dump();
}

Palette::Palette(std::vector<Rgb> colors, Rgb voidColor)
    : colors_(std::move(colors)), void_(voidColor) {
    if (colors_.size() > 255) {
        throw Error(ErrorCode::InvalidArgument, "palette holds at most 255 categories");
    }
    std::set<std::uint32_t> seen;
    for (const Rgb& c : colors_) {
        if (!seen.insert((std::uint32_t(c.r) << 16) | (std::uint32_t(c.g) << 8) | c.b).second) {
            throw Error(ErrorCode::InvalidArgument, "palette colours must be unique");
        }
    }
}

Palette Palette::pascalVoc(int categories) {
    if (categories < 1 || categories > 255) {
        throw Error(ErrorCode::OutOfRange, "palette size must lie in [1, 255]");
    }
    std::vector<Rgb> colors;
    for (int i = 0; i < categories; ++i) {
        int r = 0, g = 0, b = 0, c = i;
        for (int j = 0; j < 8; ++j) {
            r |= ((c >> 0) & 1) << (7 - j);
            g |= ((c >> 1) & 1) << (7 - j);
            b |= ((c >> 2) & 1) << (7 - j);
            c >>= 3;
        }
        colors.push_back(Rgb{std::uint8_t(r), std::uint8_t(g), std::uint8_t(b)});
    }
    return Palette(std::move(colors));
}

Rgb Palette::color(std::uint8_t category) const {
    if (category == kUnlabeled) {
        return void_;
    }
    if (category >= colors_.size()) {
        throw Error(ErrorCode::UnknownCategoryValue,
                    "category " + std::to_string(category) + " not in palette");
    }
    return colors_[category];
}

} // namespace tracegrow
