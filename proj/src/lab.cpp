#include <tracegrow/rgr.h>

#include <array>
#include <cmath>

namespace tracegrow {

namespace {

// D65 reference white.
constexpr double kWhiteX = 0.95047;
constexpr double kWhiteY = 1.00000;
constexpr double kWhiteZ = 1.08883;

constexpr double kEpsilon = 216.0 / 24389.0;
constexpr double kKappa = 24389.0 / 27.0;

const std::array<double, 256>& linearLut() {
    static const std::array<double, 256> lut = [] {
        std::array<double, 256> t{};
        for (int i = 0; i < 256; ++i) {
            const double c = i / 255.0;
            t[static_cast<std::size_t>(i)] =
                c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
        }
        return t;
    }();
    return lut;
}

double labF(double t) {
    return t > kEpsilon ? std::cbrt(t) : (kKappa * t + 16.0) / 116.0;
}

} // namespace

Lab toLab(Rgb color) noexcept {
    const auto& lut = linearLut();
    const double r = lut[color.r];
    const double g = lut[color.g];
    const double b = lut[color.b];

    const double x = 0.412453 * r + 0.357580 * g + 0.180423 * b;
    const double y = 0.212671 * r + 0.715160 * g + 0.072169 * b;
    const double z = 0.019334 * r + 0.119193 * g + 0.950227 * b;

    const double fx = labF(x / kWhiteX);
    const double fy = labF(y / kWhiteY);
    const double fz = labF(z / kWhiteZ);

    return Lab{116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

LabColorPlane toLab(const RgbImage& image) {
    LabColorPlane out(image.width(), image.height());
    for (std::size_t i = 0; i < image.size(); ++i) {
        out[i] = toLab(image[i]);
    }
    return out;
}

} // namespace tracegrow
