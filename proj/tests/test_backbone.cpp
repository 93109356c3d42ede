// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "test_support.hpp"
#include "unipix/backbone.hpp"
#include "unipix/error.hpp"

using namespace unipix;

namespace {

std::size_t linear(std::size_t in, std::size_t out) { return in * out + out; }

// Independent closed-form parameter count.
std::size_t expected_parameters(const ModelConfig& c, ImageShape img, LatentLayout lat) {
    const std::size_t w = c.width;
    const std::size_t h = static_cast<std::size_t>(c.mlp_ratio) * w;
    const std::size_t ln = 2 * w;
    const std::size_t attn = linear(w, 3 * w) + linear(w, w);
    const std::size_t mlp = linear(w, h) + linear(h, w);
    const std::size_t patch_in = static_cast<std::size_t>(c.patch_size * c.patch_size * img.channels);
    std::size_t n = linear(patch_in, w);
    n += static_cast<std::size_t>(c.encoder_depth) * (2 * ln + attn + mlp);
    n += ln;         // encoder norm
    n += 2 * w * 2;  // task and segment embeddings
    n += linear(lat.channels, w);
    n += linear(c.time_embed_dim, w) + linear(w, w);
    n += static_cast<std::size_t>(c.depth) * (linear(w, 6 * w) + attn + mlp);
    n += linear(w, 2 * w) + linear(w, lat.channels);
    return n;
}

Backbone<double> randomized_tiny(std::uint64_t seed) {
    Backbone<double> m(testing::tiny_model_config(), testing::tiny_canvas(), testing::tiny_latent());
    m.init(seed);
    Rng rng(seed + 100);
    for (double& v : m.params().values()) v = rng.normal() * 0.3;
    return m;
}

}  // namespace

TEST_SUITE("backbone") {

TEST_CASE("same seed gives identical parameters") {
    Backbone<float> a(testing::tiny_model_config(), testing::tiny_canvas(), testing::tiny_latent());
    Backbone<float> b(testing::tiny_model_config(), testing::tiny_canvas(), testing::tiny_latent());
    Backbone<float> c(testing::tiny_model_config(), testing::tiny_canvas(), testing::tiny_latent());
    a.init(3);
    b.init(3);
    c.init(4);
    CHECK(a.params().values() == b.params().values());
    CHECK_FALSE(a.params().values() == c.params().values());
}

TEST_CASE("parameter count matches the closed form") {
    const ModelConfig cfg = testing::tiny_model_config();
    Backbone<float> m(cfg, testing::tiny_canvas(), testing::tiny_latent());
    CHECK(m.count_parameters() == expected_parameters(cfg, testing::tiny_canvas(), testing::tiny_latent()));

    ModelConfig def;
    Backbone<float> d(def, {64, 64, 3}, {8, 8, 192});
    CHECK(d.count_parameters() == expected_parameters(def, {64, 64, 3}, {8, 8, 192}));
}

TEST_CASE("depth scaling adds exactly one block per level") {
    ModelConfig cfg = testing::tiny_model_config();
    Backbone<float> one(cfg, testing::tiny_canvas(), testing::tiny_latent());
    cfg.depth = 2;
    Backbone<float> two(cfg, testing::tiny_canvas(), testing::tiny_latent());
    const std::size_t w = cfg.width;
    const std::size_t h = cfg.mlp_ratio * w;
    const std::size_t block = linear(w, 6 * w) + linear(w, 3 * w) + linear(w, w) + linear(w, h) + linear(h, w);
    CHECK(two.count_parameters() - one.count_parameters() == block);
}

TEST_CASE("invalid configs are rejected") {
    ModelConfig cfg = testing::tiny_model_config();
    cfg.depth = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = testing::tiny_model_config();
    cfg.heads = 3;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = testing::tiny_model_config();
    cfg.time_embed_dim = 7;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = testing::tiny_model_config();
    cfg.patch_size = 5;
    CHECK_THROWS_AS(cfg.validate_for(testing::tiny_canvas()), Error);
    cfg = testing::tiny_model_config();
    cfg.cond_tokens = 8;
    CHECK_THROWS_AS(cfg.validate_for(testing::tiny_canvas()), Error);
    cfg = testing::tiny_model_config();
    cfg.output = "epsilon";
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = testing::tiny_model_config();
    cfg.time_floor = 0.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("output shape and finiteness") {
    Rng rng(2);
    Backbone<float> m(testing::tiny_model_config(), testing::tiny_canvas(), testing::tiny_latent());
    m.init(1);
    const PixelImage img = testing::random_image(testing::tiny_canvas(), rng);
    const Mat<float> cond = m.encode_condition(img, TaskDirection::generation);
    CHECK(cond.rows() == 17);
    CHECK(cond.cols() == 8);
    const Mat<float> z = testing::random_mat<float>(16, 48, rng);
    for (float t : {0.0f, 0.5f, 1.0f}) {
        const Mat<float> v = m.predict_velocity(z, t, cond);
        CHECK(v.rows() == 16);
        CHECK(v.cols() == 48);
        CHECK(v.allFinite());
    }
    CHECK_THROWS_AS(m.predict_velocity(z, 1.5f, cond), Error);
    CHECK_THROWS_AS(m.predict_velocity(Mat<float>(z.leftCols(10)), 0.5f, cond), Error);
}

TEST_CASE("zero-initialized output layer") {
    Rng rng(9);
    ModelConfig cfg = testing::tiny_model_config();
    Backbone<float> clean(cfg, testing::tiny_canvas(), testing::tiny_latent());
    cfg.output = "velocity";
    Backbone<float> direct(cfg, testing::tiny_canvas(), testing::tiny_latent());
    clean.init(1);
    direct.init(1);
    const PixelImage img = testing::random_image(testing::tiny_canvas(), rng);
    const Mat<float> z = testing::random_mat<float>(16, 48, rng);
    // The clean estimate starts at zero, so v = z_t / max(t, floor).
    CHECK((clean.predict_velocity(z, 0.5f, clean.encode_condition(img, TaskDirection::understanding)) - z * 2.0f)
              .cwiseAbs()
              .maxCoeff() == 0.0f);
    CHECK((clean.predict_velocity(z, 0.01f, clean.encode_condition(img, TaskDirection::understanding)) - z * (1.0f / 0.3f))
              .cwiseAbs()
              .maxCoeff() <= 1e-5f);
    CHECK(direct.predict_velocity(z, 0.3f, direct.encode_condition(img, TaskDirection::understanding)).isZero(0));
}

TEST_CASE("direction only changes the task row") {
    Rng rng(4);
    const Backbone<double> m = randomized_tiny(4);
    const PixelImage img = testing::random_image(testing::tiny_canvas(), rng);
    const Mat<double> u = m.encode_condition(img, TaskDirection::understanding);
    const Mat<double> g = m.encode_condition(img, TaskDirection::generation);
    CHECK(u.topRows(16) == g.topRows(16));
    CHECK_FALSE(u.row(16) == g.row(16));

    const Mat<double> z = testing::random_mat<double>(16, 48, rng);
    CHECK((m.predict_velocity(z, 0.4, u) - m.predict_velocity(z, 0.4, g)).norm() > 1e-6);
}

TEST_CASE("condition token order matters") {
    Rng rng(5);
    const Backbone<double> m = randomized_tiny(5);
    const Mat<double> cond = m.encode_condition(testing::random_image(testing::tiny_canvas(), rng),
                                                TaskDirection::generation);
    Mat<double> swapped = cond;
    swapped.row(0).swap(swapped.row(7));
    const Mat<double> z = testing::random_mat<double>(16, 48, rng);
    CHECK((m.predict_velocity(z, 0.6, cond) - m.predict_velocity(z, 0.6, swapped)).norm() > 1e-6);
}

TEST_CASE("batched and single-example paths agree") {
    Rng rng(6);
    const Backbone<double> m = randomized_tiny(6);
    const PixelImage a = testing::random_image(testing::tiny_canvas(), rng);
    const PixelImage b = testing::random_image(testing::tiny_canvas(), rng);
    typename Backbone<double>::EncoderTape et;
    typename Backbone<double>::VelocityTape vt;
    const std::vector<TaskDirection> dirs = {TaskDirection::understanding, TaskDirection::generation};
    const Mat<double> cond = m.encode_batch({&a, &b}, dirs, et);
    const Mat<double> z = testing::random_mat<double>(32, 48, rng);
    const Mat<double> v = m.velocity_batch(z, {0.2, 0.9}, cond, vt);
    const Mat<double> ca = m.encode_condition(a, dirs[0]);
    const Mat<double> cb = m.encode_condition(b, dirs[1]);
    CHECK((cond.topRows(17) - ca).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((cond.bottomRows(17) - cb).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((v.topRows(16) - m.predict_velocity(Mat<double>(z.topRows(16)), 0.2, ca)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((v.bottomRows(16) - m.predict_velocity(Mat<double>(z.bottomRows(16)), 0.9, cb)).cwiseAbs().maxCoeff() <
          1e-12);
}

TEST_CASE("float and double models agree") {
    Rng rng(7);
    const Backbone<double> d = randomized_tiny(7);
    Backbone<float> f(testing::tiny_model_config(), testing::tiny_canvas(), testing::tiny_latent());
    copy_parameters(d, f);
    const PixelImage img = testing::random_image(testing::tiny_canvas(), rng);
    const Mat<double> z = testing::random_mat<double>(16, 48, rng);
    const Mat<double> vd = d.predict_velocity(z, 0.5, d.encode_condition(img, TaskDirection::generation));
    const Mat<float> vf = f.predict_velocity(z.cast<float>(), 0.5f, f.encode_condition(img, TaskDirection::generation));
    CHECK((vd - vf.cast<double>()).cwiseAbs().maxCoeff() < 1e-3 * (1.0 + vd.cwiseAbs().maxCoeff()));
}

TEST_CASE("input gradients match directional derivatives") {
    Rng rng(8);
    Backbone<double> m = randomized_tiny(8);
    const PixelImage img = testing::random_image(testing::tiny_canvas(), rng);
    const Mat<double> cond = m.encode_condition(img, TaskDirection::understanding);
    const Mat<double> z = testing::random_mat<double>(16, 48, rng);
    const Mat<double> wout = testing::random_mat<double>(16, 48, rng);
    const Mat<double> uz = testing::random_mat<double>(16, 48, rng);
    const Mat<double> uc = testing::random_mat<double>(17, 8, rng);
    const double t = 0.35;

    typename Backbone<double>::VelocityTape vt;
    m.velocity_batch(z, {t}, cond, vt);
    m.params().zero_grad();
    const auto g = m.velocity_backward(vt, wout);

    const double eps = 1e-5;
    auto project = [&](const Mat<double>& zz, const Mat<double>& cc) {
        return (m.predict_velocity(zz, t, cc).array() * wout.array()).sum();
    };
    const double fd_z = (project(z + eps * uz, cond) - project(z - eps * uz, cond)) / (2 * eps);
    const double fd_c = (project(z, cond + eps * uc) - project(z, cond - eps * uc)) / (2 * eps);
    const double an_z = (g.d_z.array() * uz.array()).sum();
    const double an_c = (g.d_cond.array() * uc.array()).sum();
    CHECK(std::abs(fd_z - an_z) <= 1e-6 * (1.0 + std::abs(an_z)));
    CHECK(std::abs(fd_c - an_c) <= 1e-6 * (1.0 + std::abs(an_c)));
}

TEST_CASE("parameter gradients match finite differences") {
    for (const char* output : {"clean", "velocity"}) {
        const auto errors = testing::gradient_check(21, 1e-4, output);
        REQUIRE(!errors.empty());
        for (const auto& e : errors) {
            INFO(output << " " << e.name << " relative error " << e.rel_error);
            CHECK(e.rel_error <= 1e-3);
        }
    }
}

}  // TEST_SUITE
