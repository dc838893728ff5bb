#include <doctest.h>

#include <cmath>

#include "focalfuse/losses.hpp"
#include "focalfuse/rng.hpp"
#include "oracles.hpp"

using namespace focalfuse;

TEST_SUITE_BEGIN("losses");

TEST_CASE("focal loss reproduces the hand-derived value") {
    // d=0.5, field value + threshold = 0.02, sigma1=0.05, sigma2=0.01:
    // (1 - e^-5) * tanh(2) = 0.993262... * 0.964028... = 0.957532...
    FocalLossParams params;
    params.sigma1 = 0.05;
    params.sigma2 = 0.01;
    params.xi = 0.005;
    const double value = 0.02 - params.xi;  // so value + xi = 0.02
    std::vector<double> vals{value}, dists{0.5};
    ScalarLoss loss = geometric_focal_loss(vals, dists, params);
    const double expected = (1.0 - std::exp(-5.0)) * std::tanh(2.0);
    CHECK(expected == doctest::Approx(0.957532).epsilon(1e-6));
    CHECK(loss.value == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("focal loss boundary and hinge edge cases") {
    FocalLossParams params;
    std::vector<double> vals{0.4}, d0{0.0};
    CHECK(geometric_focal_loss(vals, d0, params).value == 0.0);

    std::vector<double> at_hinge{-params.xi}, d{0.7};
    ScalarLoss hinge = geometric_focal_loss(at_hinge, d, params);
    CHECK(hinge.value == 0.0);
    CHECK(hinge.grad[0] == 0.0);

    ScalarLoss empty = geometric_focal_loss({}, {}, params);
    CHECK(empty.value == 0.0);
    CHECK(empty.grad.empty());
}

TEST_CASE("focal loss bounds and monotonicity") {
    FocalLossParams params;
    Rng rng(10001);
    for (int i = 0; i < 500; ++i) {
        std::vector<double> vals(8), dists(8);
        for (int j = 0; j < 8; ++j) {
            vals[j] = rng.uniform(-0.2, 0.4);
            dists[j] = rng.uniform(0.0, 1.0);
        }
        ScalarLoss loss = geometric_focal_loss(vals, dists, params);
        CHECK(loss.value >= 0.0);
        CHECK(loss.value < 1.0);

        // Nondecreasing in each field sample and in each distance.
        int j = int(rng.uniform_index(8));
        std::vector<double> vplus = vals;
        vplus[j] += 0.01;
        CHECK(geometric_focal_loss(vplus, dists, params).value >= loss.value);
        std::vector<double> dplus = dists;
        dplus[j] += 0.05;
        CHECK(geometric_focal_loss(vals, dplus, params).value >= loss.value);
    }
}

TEST_CASE("focal loss gradient matches finite differences") {
    FocalLossParams params;
    Rng rng(10002);
    int checked = 0;
    while (checked < 600) {
        // Probe the responsive band of the hinge-tanh; deep in the saturated
        // tail both sides vanish below the float noise of the difference
        // quotient and a relative comparison is meaningless.
        std::vector<double> vals(4), dists(4);
        for (int j = 0; j < 4; ++j) {
            vals[j] = rng.uniform(-0.03, 0.04);
            dists[j] = rng.uniform(0.01, 1.0);
        }
        int j = int(rng.uniform_index(4));
        if (std::abs(vals[j] + params.xi) < 1e-3) continue;  // hinge kink
        ScalarLoss loss = geometric_focal_loss(vals, dists, params);
        const double h = 1e-5;
        std::vector<double> plus = vals, minus = vals;
        plus[j] += h;
        minus[j] -= h;
        double fd = (geometric_focal_loss(plus, dists, params).value -
                     geometric_focal_loss(minus, dists, params).value) /
                    (2 * h);
        if (std::abs(fd) > 1e-6) {
            CHECK(oracle::relative_error(loss.grad[j], fd) < 1e-4);
            ++checked;
        }
    }

    // Saturated tail: analytic and numeric gradients agree on (near) zero.
    std::vector<double> deep{0.5}, d{0.5};
    ScalarLoss sat = geometric_focal_loss(deep, d, params);
    CHECK(sat.grad[0] < 1e-12);
}

TEST_CASE("collision loss spot values") {
    std::vector<double> base{0.2}, edit{0.3};
    CHECK(collision_loss(base, edit).value == doctest::Approx(0.06).epsilon(1e-12));

    std::vector<double> base_neg{-0.2};
    CHECK(collision_loss(base_neg, edit).value == 0.0);
    std::vector<double> both_neg_b{-0.2}, both_neg_e{-0.3};
    CHECK(collision_loss(both_neg_b, both_neg_e).value == 0.0);

    std::vector<double> mismatched{0.1, 0.2};
    CHECK_THROWS_AS(collision_loss(base, mismatched), std::invalid_argument);
}

TEST_CASE("collision loss gradient matches finite differences") {
    Rng rng(10003);
    int checked = 0;
    while (checked < 600) {
        std::vector<double> base(5), edit(5);
        for (int j = 0; j < 5; ++j) {
            base[j] = rng.uniform(-0.5, 0.5);
            edit[j] = rng.uniform(-0.5, 0.5);
        }
        int j = int(rng.uniform_index(5));
        if (std::abs(edit[j]) < 1e-3) continue;  // hinge kink
        ScalarLoss loss = collision_loss(base, edit);
        const double h = 1e-5;
        std::vector<double> plus = edit, minus = edit;
        plus[j] += h;
        minus[j] -= h;
        double fd =
            (collision_loss(base, plus).value - collision_loss(base, minus).value) / (2 * h);
        CHECK(std::abs(loss.grad[j] - fd) < 1e-7 + 1e-4 * std::abs(fd));
        ++checked;
    }
}

TEST_CASE("field objective: exact zero on agreement, epsilon^2 under offset") {
    std::vector<double> vals{0.1, -0.2, 0.4};
    CHECK(field_mse_objective(vals, vals).value == 0.0);

    const double eps = 0.01;
    std::vector<double> shifted = vals;
    for (auto& v : shifted) v += eps;
    CHECK(field_mse_objective(shifted, vals).value == doctest::Approx(eps * eps).epsilon(1e-9));
}

TEST_CASE("field objective gradient matches finite differences") {
    Rng rng(10004);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> vals(6), target(6);
        for (int j = 0; j < 6; ++j) {
            vals[j] = rng.uniform(-1, 1);
            target[j] = rng.uniform(-1, 1);
        }
        ScalarLoss loss = field_mse_objective(vals, target);
        int j = int(rng.uniform_index(6));
        const double h = 1e-5;
        std::vector<double> plus = vals, minus = vals;
        plus[j] += h;
        minus[j] -= h;
        double fd = (field_mse_objective(plus, target).value -
                     field_mse_objective(minus, target).value) /
                    (2 * h);
        CHECK(oracle::relative_error(loss.grad[j], fd) < 1e-6);
    }
}

TEST_CASE("masked image objective") {
    Image rendered(4, 4, 3), target(4, 4, 3);
    std::vector<uint8_t> mask(16, 0);

    // Identical images: zero.
    mask.assign(16, 1);
    CHECK(masked_image_mse(rendered, target, mask).value == 0.0);

    // Empty mask: zero value and zero gradient.
    mask.assign(16, 0);
    ImageLoss empty = masked_image_mse(rendered, target, mask);
    CHECK(empty.value == 0.0);
    for (double g : empty.grad.data) CHECK(g == 0.0);

    // One masked pixel differing by 0.5 per channel: 3*0.25 / area.
    mask.assign(16, 1);
    for (int c = 0; c < 3; ++c) rendered.at(2, 1, c) = 0.5;
    ImageLoss one = masked_image_mse(rendered, target, mask);
    CHECK(one.value == doctest::Approx(0.75 / 16.0).epsilon(1e-12));

    // Gradient vanishes off-mask.
    mask[0] = 0;
    ImageLoss off = masked_image_mse(rendered, target, mask);
    for (int c = 0; c < 3; ++c) CHECK(off.grad.at(0, 0, c) == 0.0);

    Image wrong(3, 4, 3);
    CHECK_THROWS_AS(masked_image_mse(rendered, wrong, mask), std::invalid_argument);
}

TEST_CASE("style consistency spot values") {
    Aabb box = Aabb::cube(1.0);
    TextureField tex_e(4, box), tex_b(4, box);
    tex_e.fill_constant({0.5, 0.5, 0.5}, 0.5, 0.0);
    tex_b.fill_constant({0.7, 0.7, 0.7}, 0.5, 0.0);

    std::vector<Vec3> boundary{{0.1, 0.2, -0.3}};
    Rng rng(10005);

    // Constant equal fields: everything zero.
    TextureField same = tex_b;
    StyleConsistency zero =
        style_consistency(tex_b, same, boundary, boundary, 0.01, 100.0, rng);
    CHECK(zero.smoothness == doctest::Approx(0.0).epsilon(1e-18));
    CHECK(zero.boundary == doctest::Approx(0.0).epsilon(1e-18));

    // Boundary deviation (0.5 vs 0.7) on three channels: 3 * 0.04.
    StyleConsistency dev = style_consistency(tex_e, tex_b, {}, boundary, 0.01, 100.0, rng);
    CHECK(dev.boundary == doctest::Approx(0.12).epsilon(1e-9));
    CHECK(dev.total == doctest::Approx(100.0 * 0.12).epsilon(1e-9));

    // Zero probe scale: the interior term is exactly zero.
    std::vector<Vec3> interior{{0.0, 0.0, 0.0}, {0.2, -0.1, 0.4}};
    StyleConsistency no_probe = style_consistency(tex_e, tex_b, interior, boundary, 0.0, 100.0, rng);
    CHECK(no_probe.smoothness == 0.0);

    // Empty boundary with a positive weight raises the warning flag.
    StyleConsistency warn = style_consistency(tex_e, tex_b, interior, {}, 0.01, 100.0, rng);
    CHECK(warn.empty_boundary_warning);
    CHECK(warn.boundary == 0.0);
}

TEST_CASE("style consistency gradient matches finite differences") {
    Aabb box = Aabb::cube(1.0);
    TextureField tex_e(3, box), tex_b(3, box);
    Rng fill(10006);
    for (auto& p : tex_e.params()) p = fill.uniform(-1.0, 1.0);
    tex_b.fill_constant({0.6, 0.4, 0.3}, 0.5, 0.0);

    std::vector<Vec3> interior, boundary;
    for (int i = 0; i < 6; ++i) {
        interior.push_back(fill.uniform_in_cube(0.9));
        boundary.push_back(fill.uniform_in_cube(0.9));
    }

    const uint64_t probe_seed = 4242;
    auto eval_loss = [&](const TextureField& field) {
        Rng rng(probe_seed);  // identical probe offsets on every evaluation
        return style_consistency(field, tex_b, interior, boundary, 0.05, 100.0, rng);
    };

    StyleConsistency base = eval_loss(tex_e);
    int checked = 0;
    // Walk the parameters that actually participate (diffuse channels of
    // corners touched by a sample stencil); everything else must be zero.
    for (size_t j = 0; j < tex_e.params().size() && checked < 520; ++j) {
        const double h = 1e-5;
        if (std::abs(base.grad_params[j]) < 1e-6) continue;
        TextureField plus = tex_e, minus = tex_e;
        plus.params()[j] += h;
        minus.params()[j] -= h;
        double fd = (eval_loss(plus).total - eval_loss(minus).total) / (2 * h);
        CHECK(oracle::relative_error(base.grad_params[j], fd) < 1e-4);
        ++checked;
    }
    CHECK(checked >= 300);

    // Non-diffuse channels carry no style gradient.
    for (size_t row = 0; row < tex_e.params().size() / 8; ++row)
        for (int ch = 3; ch < 8; ++ch) CHECK(base.grad_params[row * 8 + ch] == 0.0);
}

TEST_CASE("schedule weight") {
    Rng rng(10008);
    CHECK(schedule_weight(5, 10, 0.5, 0.5, rng) == 0.5);
    CHECK_THROWS_AS(schedule_weight(5, 10, 0.9, 0.2, rng), std::invalid_argument);
    CHECK_THROWS_AS(schedule_weight(11, 10, 0.1, 0.2, rng), std::invalid_argument);

    // Geometry defaults draw inside [0.02, 0.35]; empirical mean ~ midpoint.
    const double t0 = 0.02, tf = 0.35;
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        double t = schedule_weight(0, 1, t0, tf, rng);
        CHECK(t >= t0);
        CHECK(t < tf);
        sum += t;
    }
    const double mean = sum / n;
    const double expected = 0.5 * (t0 + tf);
    const double sigma = (tf - t0) / std::sqrt(12.0 * n);
    CHECK(std::abs(mean - expected) < 3.0 * sigma);
}

TEST_CASE("loss report recomposes exactly from components") {
    Rng rng(10009);
    for (int i = 0; i < 1000; ++i) {
        double standin = rng.uniform(0, 2), gf = rng.uniform(0, 1), ca = rng.uniform(0, 1);
        LossReport g = LossReport::geometry(standin, gf, ca, 1000.0, 100.0);
        CHECK(g.total == standin + 1000.0 * g.gf + 100.0 * g.ca);

        double scg = rng.uniform(0, 1), scb = rng.uniform(0, 1);
        LossReport a = LossReport::appearance(standin, scg, scb, 10.0, 100.0);
        CHECK(a.total == standin + 10.0 * (a.sc_g + 100.0 * a.sc_b));
    }
}

TEST_SUITE_END();
