// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>

#include "test_support.hpp"
#include "unipix/error.hpp"
#include "unipix/flow.hpp"

using namespace unipix;

namespace {

Mat<float> vec(std::initializer_list<float> v) {
    Mat<float> m(1, static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (float x : v) m(0, i++) = x;
    return m;
}

}  // namespace

TEST_SUITE("flow_core") {

TEST_CASE("interpolate examples") {
    const Mat<float> z0 = vec({2, -1});
    const Mat<float> z1 = vec({0, 3});
    CHECK(interpolate(z0, z1, 0.0f).z_t == z0);
    CHECK(interpolate(z0, z1, 1.0f).z_t == z1);
    const Mat<float> q = interpolate(z0, z1, 0.25f).z_t;
    CHECK(q(0, 0) == doctest::Approx(1.5));
    CHECK(q(0, 1) == doctest::Approx(0.0));
    const Mat<float> h = interpolate(z0, z1, 0.5f).z_t;
    CHECK(h(0, 0) == doctest::Approx(1.0));
    CHECK(h(0, 1) == doctest::Approx(1.0));
}

TEST_CASE("interpolate errors") {
    const Mat<float> a = vec({1, 2});
    const Mat<float> b = vec({1, 2, 3});
    CHECK_THROWS_AS(interpolate(a, b, 0.5f), Error);
    CHECK_THROWS_AS(interpolate(a, a, 1.5f), Error);
    CHECK_THROWS_AS(interpolate(a, a, -0.1f), Error);
}

TEST_CASE("velocity target examples") {
    const Mat<float> z = vec({0.5f, -2});
    CHECK(velocity_target(z, z).isZero(0));
    CHECK(velocity_target(vec({0, 0}), vec({1, 1})) == vec({1, 1}));
    CHECK_THROWS_AS(velocity_target(vec({0}), vec({1, 1})), Error);
}

TEST_CASE("straight path identities on random pairs") {
    Rng rng(5);
    for (int k = 0; k < 1000; ++k) {
        const Mat<double> z0 = testing::random_mat<double>(3, 7, rng);
        const Mat<double> z1 = testing::random_mat<double>(3, 7, rng);
        const double t = rng.uniform();
        const Mat<double> v = velocity_target(z0, z1);
        CHECK((interpolate(z0, z1, t).z_t + (1.0 - t) * v - z1).cwiseAbs().maxCoeff() <= 1e-6);
        CHECK(flow_loss(v, z0, z1) == 0.0);
    }
}

TEST_CASE("path linearity") {
    Rng rng(6);
    const Mat<double> z0 = testing::random_mat<double>(2, 5, rng);
    const Mat<double> z1 = testing::random_mat<double>(2, 5, rng);
    const double t = 0.6;
    const double s = 0.3;
    // Interpolating from z0 to z(t) at s lands on z(s * t).
    const Mat<double> zt = interpolate(z0, z1, t).z_t;
    const Mat<double> composed = interpolate(z0, zt, s).z_t;
    CHECK((composed - interpolate(z0, z1, s * t).z_t).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("flow loss examples") {
    Rng rng(8);
    const Mat<float> z0 = Mat<float>::Zero(4, 4);
    Mat<float> z1(4, 4);
    for (Eigen::Index i = 0; i < z1.size(); ++i) z1.data()[i] = (i % 2) ? 1.0f : -1.0f;
    CHECK(flow_loss(Mat<float>(Mat<float>::Zero(4, 4)), z0, z1) == doctest::Approx(1.0));
    CHECK(flow_loss(velocity_target(z0, z1), z0, z1) == 0.0);

    // Permuting rows of all three tensors leaves the mean unchanged.
    const Mat<float> a = testing::random_mat<float>(5, 3, rng);
    const Mat<float> b = testing::random_mat<float>(5, 3, rng);
    const Mat<float> p = testing::random_mat<float>(5, 3, rng);
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(5);
    perm.indices() << 3, 0, 4, 1, 2;
    CHECK(flow_loss(Mat<float>(perm * p), Mat<float>(perm * a), Mat<float>(perm * b)) ==
          doctest::Approx(flow_loss(p, a, b)).epsilon(1e-12));

    Mat<float> bad = p;
    bad(0, 0) = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(flow_loss(bad, a, b), Error);
    CHECK(flow_loss(p, a, b) > 0.0);
}

TEST_CASE("sample_time statistics") {
    Rng rng(12);
    double sum = 0;
    double lo = 1;
    double hi = 0;
    std::vector<double> first;
    for (int i = 0; i < 100000; ++i) {
        const double t = sample_time(rng);
        sum += t;
        lo = std::min(lo, t);
        hi = std::max(hi, t);
        if (i < 10) first.push_back(t);
    }
    CHECK(std::abs(sum / 100000 - 0.5) < 0.01);
    CHECK(lo >= 0.0);
    CHECK(hi <= 1.0);
    Rng again(12);
    for (double t : first) CHECK(sample_time(again) == t);
}

TEST_CASE("Euler is exact for constant fields") {
    Rng rng(13);
    const Mat<float> z1 = sample_prior(rng, 6, 9);
    const Mat<float> c = testing::random_mat<float>(6, 9, rng);
    const Mat<float> expected = z1 - c;
    for (int n : {1, 7, 50, 100}) {
        SamplerConfig cfg;
        cfg.num_steps = n;
        const Mat<float> z = euler_sample([&](const Mat<float>&, float) { return c; }, z1, cfg);
        CHECK(z == expected);
    }
}

TEST_CASE("oracle field transports in one step") {
    Rng rng(14);
    const Mat<float> z0 = testing::random_mat<float>(4, 8, rng);
    const Mat<float> z1 = sample_prior(rng, 4, 8);
    SamplerConfig cfg;
    cfg.num_steps = 1;
    const Mat<float> v = velocity_target(z0, z1);
    const Mat<float> z = euler_sample([&](const Mat<float>&, float) { return v; }, z1, cfg);
    CHECK((z - z0).cwiseAbs().maxCoeff() <= 1e-5f);
}

TEST_CASE("Euler matches the plain update for a state-dependent field") {
    Rng rng(15);
    const Mat<float> z1 = sample_prior(rng, 3, 3);
    SamplerConfig cfg;
    cfg.num_steps = 10;
    auto field = [](const Mat<float>& z, float t) { return Mat<float>(0.5f * z * t); };
    Mat<float> ref = z1;
    for (int k = 0; k < 10; ++k) ref -= 0.1f * field(ref, 1.0f - 0.1f * k);
    CHECK((euler_sample(field, z1, cfg) - ref).cwiseAbs().maxCoeff() <= 1e-5f);
}

TEST_CASE("Euler visits times from 1 down to 1/n") {
    SamplerConfig cfg;
    cfg.num_steps = 4;
    std::vector<float> ts;
    euler_sample(
        [&](const Mat<float>& z, float t) {
            ts.push_back(t);
            return Mat<float>(Mat<float>::Zero(z.rows(), z.cols()));
        },
        Mat<float>(Mat<float>::Zero(1, 1)), cfg);
    CHECK(ts == std::vector<float>{1.0f, 0.75f, 0.5f, 0.25f});
}

TEST_CASE("Euler aborts on non-finite state with the step index") {
    SamplerConfig cfg;
    cfg.num_steps = 5;
    int calls = 0;
    try {
        euler_sample(
            [&](const Mat<float>& z, float) {
                Mat<float> v = Mat<float>::Zero(z.rows(), z.cols());
                if (++calls == 3) v(0, 0) = std::numeric_limits<float>::infinity();
                return v;
            },
            Mat<float>(Mat<float>::Zero(2, 2)), cfg);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::non_finite);
        CHECK(std::string(e.what()).find("step 2") != std::string::npos);
    }
}

TEST_CASE("sampler config validation") {
    SamplerConfig cfg;
    cfg.num_steps = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.num_steps = 3;
    cfg.scheme = "heun";
    CHECK_THROWS_AS(cfg.validate(), Error);
}

}  // TEST_SUITE
