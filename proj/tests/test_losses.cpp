#include "doctest.h"
#include "splatedit/losses.hpp"
#include "splatedit/rng.hpp"
#include "test_support.hpp"

using namespace splatedit;
using namespace splatedit::losses;
using testsupport::close_rel;

namespace {

Image<double> random_image(int h, int w, std::uint64_t seed, int c = 3) {
    Rng rng(seed);
    Image<double> img(h, w, c);
    for (auto& v : img.data) v = rng.uniform();
    return img;
}

/// Windowwise reference SSIM: direct evaluation of the scalar formula over
/// every 11x11 reflect-padded window, independent of the incremental-moment
/// implementation in the library.
double reference_ssim(const Image<double>& a, const Image<double>& b) {
    const int win = 11, c = 5;
    std::array<double, 11> k{};
    double ksum = 0;
    for (int i = 0; i < win; ++i) {
        k[i] = std::exp(-double((i - c) * (i - c)) / (2.0 * 1.5 * 1.5));
        ksum += k[i];
    }
    for (auto& v : k) v /= ksum;

    auto reflect = [](int i, int n) {
        while (i < 0 || i >= n) {
            if (i < 0) i = -i;
            if (i >= n) i = 2 * n - 2 - i;
        }
        return i;
    };

    double total = 0;
    for (int ch = 0; ch < a.channels; ++ch) {
        for (int y = 0; y < a.height; ++y) {
            for (int x = 0; x < a.width; ++x) {
                double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
                for (int oy = 0; oy < win; ++oy)
                    for (int ox = 0; ox < win; ++ox) {
                        const double w = k[oy] * k[ox];
                        const double va = a.at(reflect(y + oy - c, a.height),
                                               reflect(x + ox - c, a.width), ch);
                        const double vb = b.at(reflect(y + oy - c, a.height),
                                               reflect(x + ox - c, a.width), ch);
                        mx += w * va;
                        my += w * vb;
                        xx += w * va * va;
                        yy += w * vb * vb;
                        xy += w * va * vb;
                    }
                const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
                const double sx = xx - mx * mx, sy = yy - my * my, sxy = xy - mx * my;
                total += ((2 * mx * my + c1) * (2 * sxy + c2)) /
                         ((mx * mx + my * my + c1) * (sx + sy + c2));
            }
        }
    }
    return total / double(a.size());
}

}  // namespace

TEST_CASE("l1 loss basics") {
    auto a = random_image(8, 8, 1);
    CHECK(l1_loss(a, a).value == 0.0);

    auto b = a;
    for (auto& v : b.data) v += 0.25;
    CHECK(l1_loss(a, b).value == doctest::Approx(0.25).epsilon(1e-12));

    // Independent accumulation order: Kahan-style high-low summation.
    auto c = random_image(8, 8, 2);
    double direct = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) direct += std::abs(a.data[i] - c.data[i]);
    direct /= double(a.data.size());
    CHECK(l1_loss(a, c).value == doctest::Approx(direct).epsilon(1e-7));

    Image<double> wrong(4, 4, 3);
    CHECK_THROWS_AS(l1_loss(a, wrong), std::invalid_argument);
}

TEST_CASE("l1 gradient matches finite differences") {
    auto a = random_image(8, 8, 3);
    auto b = random_image(8, 8, 4);
    const auto res = l1_loss(a, b);
    const double h = 1e-6;
    Rng pick(5);
    for (int k = 0; k < 30; ++k) {
        const std::size_t i = pick.uniform_index(a.data.size());
        auto up = a, down = a;
        up.data[i] += h;
        down.data[i] -= h;
        const double fd = (l1_loss(up, b).value - l1_loss(down, b).value) / (2 * h);
        CHECK(close_rel(res.grad.data[i], fd, 1e-6, 1e-12));
    }
}

TEST_CASE("dssim of identical images is zero") {
    auto a = random_image(16, 16, 7);
    CHECK(dssim_loss(a, a).value == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("dssim matches the windowwise reference formula") {
    SUBCASE("inverted checkerboard") {
        Image<double> t(16, 16, 3);
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x)
                for (int ch = 0; ch < 3; ++ch) t.at(y, x, ch) = double((x + y) % 2);
        Image<double> r = t;
        for (auto& v : r.data) v = 1.0 - v;
        const double expect = (1.0 - reference_ssim(r, t)) / 2.0;
        CHECK(dssim_loss(r, t).value == doctest::Approx(expect).epsilon(1e-10));
    }
    SUBCASE("random pair") {
        auto a = random_image(20, 14, 9);
        auto b = random_image(20, 14, 10);
        const double expect = (1.0 - reference_ssim(a, b)) / 2.0;
        CHECK(dssim_loss(a, b).value == doctest::Approx(expect).epsilon(1e-10));
    }
}

TEST_CASE("dssim gradient matches finite differences on a 16x16 pair") {
    auto a = random_image(16, 16, 11);
    auto b = random_image(16, 16, 12);
    const auto res = dssim_loss(a, b);
    const double h = 1e-5;
    Rng pick(13);
    for (int k = 0; k < 40; ++k) {
        const std::size_t i = pick.uniform_index(a.data.size());
        auto up = a, down = a;
        up.data[i] += h;
        down.data[i] -= h;
        const double fd = (dssim_loss(up, b).value - dssim_loss(down, b).value) / (2 * h);
        CHECK_MESSAGE(close_rel(res.grad.data[i], fd, 1e-4, 1e-12), "i ", i, " analytic ",
                      res.grad.data[i], " fd ", fd);
    }
}

TEST_CASE("dssim is symmetric and bounded") {
    for (std::uint64_t seed : {21, 22, 23}) {
        auto a = random_image(14, 14, seed);
        auto b = random_image(14, 14, seed + 100);
        const double ab = dssim_loss(a, b).value;
        const double ba = dssim_loss(b, a).value;
        CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);
    }
}

TEST_CASE("dssim rejects images smaller than the window") {
    auto a = random_image(10, 16, 31);
    CHECK_THROWS_AS(dssim_loss(a, a), std::invalid_argument);
}

TEST_CASE("temporal loss basics") {
    auto a = random_image(12, 12, 41);
    CHECK(temporal_loss(a, a).value == 0.0);

    auto b = a;
    for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 12; ++x) b.at(y, x, 1) += 0.1;
    CHECK(temporal_loss(a, b).value == doctest::Approx(0.1 / 3.0).epsilon(1e-12));

    // Gradients flow to both arguments.
    const auto res = temporal_loss(a, b);
    const double h = 1e-6;
    auto up = b, down = b;
    up.data[5] += h;
    down.data[5] -= h;
    const double fd_b = (temporal_loss(a, up).value - temporal_loss(a, down).value) / (2 * h);
    CHECK(close_rel(res.grad_b.data[5], fd_b, 1e-6, 1e-12));
}

TEST_CASE("temporal loss L2 variant") {
    auto a = random_image(12, 12, 43);
    auto b = random_image(12, 12, 44);
    double expect = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        expect += d * d;
    }
    expect /= double(a.data.size());
    CHECK(temporal_loss(a, b, TemporalKind::L2).value == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("total loss weight collapse and component combination") {
    auto a = random_image(16, 16, 51);
    auto b = random_image(16, 16, 52);

    LossWeights<double> w;
    w.lambda_dssim = 0.0;
    w.lambda_temporal = 0.0;
    const auto total = total_loss<double>(a, b, nullptr, w);
    const auto l1 = l1_loss(a, b);
    CHECK(total.value == doctest::Approx(l1.value).epsilon(1e-15));

    // Direct substitution of component values into the weighted sum.
    LossWeights<double> w2;
    w2.lambda_dssim = 0.2;
    w2.lambda_temporal = 0.001;
    CHECK(combine_components(0.5, 0.1, 0.3, true, w2) == doctest::Approx(0.4203).epsilon(1e-12));

    // Coefficient extraction with component stubs.
    CHECK(combine_components(1.0, 0.0, 0.0, true, w2) == doctest::Approx(0.8));
    CHECK(combine_components(0.0, 1.0, 0.0, true, w2) == doctest::Approx(0.2));
    CHECK(combine_components(0.0, 0.0, 1.0, true, w2) == doctest::Approx(0.001));
    CHECK(combine_components(0.0, 0.0, 1.0, false, w2) == doctest::Approx(0.0));
}

TEST_CASE("total loss of identical images and adjacents is zero") {
    auto a = random_image(16, 16, 61);
    LossWeights<double> w;
    const auto total = total_loss(a, a, &a, w);
    CHECK(total.value == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("total loss gradient matches finite differences with temporal term") {
    auto rendered = random_image(16, 16, 71);
    auto target = random_image(16, 16, 72);
    auto adjacent = random_image(16, 16, 73);
    LossWeights<double> w;
    w.lambda_dssim = 0.3;
    w.lambda_temporal = 0.05;
    const auto res = total_loss(rendered, target, &adjacent, w);
    REQUIRE(res.grad_adjacent.has_value());

    const double h = 1e-5;
    Rng pick(74);
    for (int k = 0; k < 20; ++k) {
        const std::size_t i = pick.uniform_index(rendered.data.size());
        auto up = rendered, down = rendered;
        up.data[i] += h;
        down.data[i] -= h;
        const double fd =
            (total_loss(up, target, &adjacent, w).value - total_loss(down, target, &adjacent, w).value) /
            (2 * h);
        CHECK(close_rel(res.grad_rendered.data[i], fd, 1e-4, 1e-10));

        auto aup = adjacent, adown = adjacent;
        aup.data[i] += h;
        adown.data[i] -= h;
        const double fd_adj =
            (total_loss(rendered, target, &aup, w).value - total_loss(rendered, target, &adown, w).value) /
            (2 * h);
        CHECK(close_rel(res.grad_adjacent->data[i], fd_adj, 1e-4, 1e-10));
    }
}

TEST_CASE("loss weights validate their ranges") {
    LossWeights<double> w;
    w.lambda_dssim = 1.5;
    CHECK_THROWS_AS(w.validate(), std::invalid_argument);
    LossWeights<double> w2;
    w2.lambda_temporal = -0.1;
    CHECK_THROWS_AS(w2.validate(), std::invalid_argument);
}
