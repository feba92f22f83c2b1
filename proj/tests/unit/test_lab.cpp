#include <tracegrow/rgr.h>

#include <doctest.h>

#include <cmath>

using namespace tracegrow;

TEST_CASE("black and white sit at the ends of the lightness axis") {
    const Lab black = toLab(Rgb{0, 0, 0});
    CHECK(black.L == doctest::Approx(0.0));
    CHECK(std::abs(black.a) < 1e-9);
    CHECK(std::abs(black.b) < 1e-9);

    const Lab white = toLab(Rgb{255, 255, 255});
    CHECK(white.L == doctest::Approx(100.0).epsilon(1e-9));
    // The sRGB matrix rows do not sum exactly to the D65 white point.
    CHECK(std::abs(white.a) < 0.01);
    CHECK(std::abs(white.b) < 0.01);
}

TEST_CASE("sRGB to Lab matches an independent converter") {
    // Reference values from skimage.color.rgb2lab (D65, 2 degree observer).
    struct Case {
        Rgb rgb;
        double L, a, b;
    };
    const Case cases[] = {
        {{255, 0, 0}, 53.24058794, 80.09230823, 67.20275104},
        {{0, 255, 0}, 87.73509949, -86.18302974, 83.17970318},
        {{0, 0, 255}, 32.29567257, 79.18559091, -107.85730021},
        {{128, 64, 32}, 34.72479591, 24.99956773, 31.37283973},
    };
    for (const Case& c : cases) {
        CAPTURE(int(c.rgb.r));
        CAPTURE(int(c.rgb.g));
        CAPTURE(int(c.rgb.b));
        const Lab lab = toLab(c.rgb);
        CHECK(std::abs(lab.L - c.L) < 0.1);
        CHECK(std::abs(lab.a - c.a) < 0.1);
        CHECK(std::abs(lab.b - c.b) < 0.1);
        // Far tighter than the contract; a regression guard on the constants.
        CHECK(std::abs(lab.L - c.L) < 1e-3);
        CHECK(std::abs(lab.a - c.a) < 1e-3);
        CHECK(std::abs(lab.b - c.b) < 1e-3);
    }
}

TEST_CASE("image conversion keeps dimensions and agrees with the per-pixel form") {
    RgbImage img(3, 2);
    img.at(0, 0) = {255, 0, 0};
    img.at(2, 1) = {10, 200, 30};
    const LabColorPlane lab = toLab(img);
    CHECK(lab.width() == 3);
    CHECK(lab.height() == 2);
    CHECK(lab.at(0, 0).a == toLab(Rgb{255, 0, 0}).a);
    CHECK(lab.at(2, 1).b == toLab(Rgb{10, 200, 30}).b);
}

TEST_CASE("lightness grows with grey level") {
    double prev = -1.0;
    for (int v = 0; v < 256; ++v) {
        const double L = toLab(Rgb{std::uint8_t(v), std::uint8_t(v), std::uint8_t(v)}).L;
        CHECK(L > prev);
        prev = L;
    }
}
