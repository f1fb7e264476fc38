// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "lmr/errors.hpp"
#include "lmr/grad_check.hpp"
#include "lmr/network.hpp"
#include "lmr/params.hpp"

using namespace lmr;

namespace {

ModelConfig small_config() {
    ModelConfig c;
    c.hidden_dim = 16;
    c.heads = 4;
    c.k_moment_queries = 3;
    c.visual_dim = 6;
    c.text_dim = 5;
    c.dropout = 0.1;
    return c;
}

FeatureMatrix random_features(std::uint32_t rows, std::uint32_t cols, std::mt19937_64& rng,
                              FeatureRole role = FeatureRole::visual) {
    std::normal_distribution<float> n(0.0f, 1.0f);
    std::vector<float> v(std::size_t(rows) * cols);
    for (auto& x : v) x = n(rng);
    return FeatureMatrix(rows, cols, std::move(v), role);
}

struct Inputs {
    FeatureMatrix visual, context, query;
};

Inputs random_inputs(const ModelConfig& c, std::uint32_t clips, std::uint64_t seed = 3) {
    std::mt19937_64 rng(seed);
    return {random_features(clips, c.visual_dim, rng),
            random_features(clips, c.text_dim, rng, FeatureRole::context_text),
            random_features(4, c.text_dim, rng, FeatureRole::query)};
}

Mat<double> permute_rows(const Mat<double>& m, const std::vector<std::uint32_t>& perm) {
    Mat<double> out(m.rows(), m.cols());
    for (std::size_t i = 0; i < perm.size(); ++i) out.row(Eigen::Index(i)) = m.row(perm[i]);
    return out;
}

}  // namespace

TEST_CASE("cross_attention reference examples") {
    using M = Mat<double>;
    SUBCASE("single key returns its value") {
        M q(2, 3), k(1, 3), v(1, 3);
        q << 1, 2, 3, -4, 5, 6;
        k << 0.3, -0.2, 0.9;
        v << 7, 8, 9;
        const M out = cross_attention<double>(q, k, v);
        for (Eigen::Index r = 0; r < 2; ++r) CHECK((out.row(r) - v.row(0)).norm() < 1e-12);
    }
    SUBCASE("equal logits average the values") {
        M q = M::Zero(1, 2), k(3, 2), v(3, 2);
        k << 1, 2, 3, 4, 5, 6;
        v << 1, 10, 2, 20, 6, 60;
        const M out = cross_attention<double>(q, k, v);
        CHECK(out(0, 0) == doctest::Approx(3.0));
        CHECK(out(0, 1) == doctest::Approx(30.0));
    }
    SUBCASE("logits 0 and ln 3 weight the values 1:3") {
        M q(1, 1), k(2, 1), v(2, 1);
        q << 1;
        k << 0, std::log(3.0);
        v << 1, 5;
        CHECK(cross_attention<double>(q, k, v)(0, 0) == doctest::Approx(4.0).epsilon(1e-12));
    }
    SUBCASE("shape mismatch") {
        CHECK_THROWS_AS(cross_attention<double>(M::Zero(1, 2), M::Zero(2, 3), M::Zero(2, 3)), ShapeError);
        CHECK_THROWS_AS(cross_attention<double>(M::Zero(1, 2), M::Zero(2, 2), M::Zero(3, 2)), ShapeError);
    }
}

TEST_CASE("relevance score is the scaled dot product") {
    const std::vector<double> u{1, 2, 0, 1}, v{2, 1, 5, 2};  // u . v = 6
    CHECK(relevance_score<double>(u, v) == doctest::Approx(3.0));
}

TEST_CASE("model config validation") {
    auto c = small_config();
    CHECK_NOTHROW(c.validate());
    c.heads = 3;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config();
    c.vqf_layers = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config();
    c.k_moment_queries = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config();
    c.dropout = 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("forward output shapes and ranges") {
    auto c = small_config();
    c.hidden_dim = 8;
    c.heads = 2;
    const auto params = init_params<float>(c, 1);
    const auto in = random_inputs(c, 75);
    const auto out = forward<float>(c, params, in.visual, in.context, in.query);
    CHECK(out.encoder_seq.rows() == 151);
    CHECK(out.encoder_seq.cols() == 8);
    CHECK(out.relevance.size() == 75);
    CHECK(out.decoder_out.rows() == c.k_moment_queries);
    CHECK(out.moments.rows() == c.k_moment_queries);
    CHECK(out.class_logits.rows() == c.k_moment_queries);
    CHECK(out.class_logits.cols() == 2);
    CHECK(out.moments.minCoeff() > 0.0f);
    CHECK(out.moments.maxCoeff() < 1.0f);
    CHECK(out.class_logits.allFinite());
    for (float s : out.relevance) CHECK(std::isfinite(s));

    const auto longer = random_inputs(c, 150);
    const auto out2 = forward<float>(c, params, longer.visual, longer.context, longer.query);
    CHECK(out2.relevance.size() == 150);
    CHECK(out2.moments.rows() == c.k_moment_queries);
}

TEST_CASE("forward rejects inconsistent inputs") {
    const auto c = small_config();
    const auto params = init_params<float>(c, 1);
    const auto in = random_inputs(c, 10);
    const auto short_ctx = random_inputs(c, 9);
    CHECK_THROWS_AS(forward<float>(c, params, in.visual, short_ctx.context, in.query), ShapeError);
    CHECK_THROWS_AS(forward<float>(c, params, in.context, in.context, in.query), ShapeError);
    auto other = c;
    other.hidden_dim = 32;
    CHECK_THROWS_AS(forward<float>(other, params, in.visual, in.context, in.query), ShapeError);
}

TEST_CASE("forward is pure and dropout acts only in training") {
    const auto c = small_config();
    const auto params = init_params<float>(c, 2);
    const auto in = random_inputs(c, 12);
    ForwardOptions a, b;
    a.dropout_seed = 1;
    b.dropout_seed = 2;
    const auto x = forward<float>(c, params, in.visual, in.context, in.query, a);
    const auto y = forward<float>(c, params, in.visual, in.context, in.query, b);
    CHECK(x.moments == y.moments);
    CHECK(x.encoder_seq == y.encoder_seq);
    CHECK(x.relevance == y.relevance);
    a.training = b.training = true;
    const auto tx = forward<float>(c, params, in.visual, in.context, in.query, a);
    const auto tx2 = forward<float>(c, params, in.visual, in.context, in.query, a);
    const auto ty = forward<float>(c, params, in.visual, in.context, in.query, b);
    CHECK(tx.moments == tx2.moments);
    CHECK(tx.moments != ty.moments);
}

TEST_CASE("recorded attention rows sum to one") {
    const auto c = small_config();
    const auto params = init_params<float>(c, 4);
    const auto in = random_inputs(c, 9);
    ForwardOptions o;
    o.record_attention = true;
    const auto out = forward<float>(c, params, in.visual, in.context, in.query, o);
    REQUIRE(out.attentions.has_value());
    const auto& att = *out.attentions;
    CHECK(att.vqf_visual.size() == c.vqf_layers);
    CHECK(att.vqf_context.size() == c.vqf_layers);
    CHECK(att.vcm.size() == c.vcm_layers);
    CHECK(att.decoder_cross.size() == c.decoder_layers);
    auto check_rows = [&](const std::vector<AttentionMaps<float>>& layers) {
        for (const auto& maps : layers) {
            CHECK(maps.probs.size() == c.heads);
            for (const auto& p : maps.probs)
                for (Eigen::Index r = 0; r < p.rows(); ++r)
                    CHECK(std::abs(p.row(r).sum() - 1.0f) <= 1e-6f);
        }
    };
    check_rows(att.vqf_visual);
    check_rows(att.vqf_context);
    check_rows(att.vcm);
    check_rows(att.decoder_cross);
    CHECK(att.vqf_context[0].probs[0].rows() == 9);
    CHECK(att.vqf_context[0].probs[0].cols() == 4);
    CHECK(att.decoder_cross[0].probs[0].cols() == 19);
}

TEST_CASE("relevance permutes with the clips when positions are off") {
    auto c = small_config();
    c.clip_positions = false;
    const auto params = init_params<double>(c, 5);
    std::mt19937_64 rng(6);
    std::normal_distribution<double> n;
    Mat<double> vis(7, c.visual_dim), ctx(7, c.text_dim), q(3, c.text_dim);
    for (auto* m : {&vis, &ctx, &q})
        for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = n(rng);
    std::vector<std::uint32_t> perm(7);
    std::iota(perm.begin(), perm.end(), 0u);
    std::shuffle(perm.begin(), perm.end(), rng);

    auto relevance = [&](const Mat<double>& v, const Mat<double>& t) {
        Tape<double> tape;
        LmrGraph<double> g(c, params, tape, {}, false);
        const auto enc = g.encode(g.input(v), g.input(t), g.project_text(g.input(q)));
        return Mat<double>(tape.value(enc.relevance));
    };
    const auto base = relevance(vis, ctx);
    const auto permuted = relevance(permute_rows(vis, perm), permute_rows(ctx, perm));
    for (std::size_t i = 0; i < perm.size(); ++i) CHECK(permuted(0, Eigen::Index(i)) == doctest::Approx(base(0, perm[i])).epsilon(1e-12));
}

TEST_CASE("moment queries are the pooled query plus learned positions") {
    auto c = small_config();
    const auto params = init_params<double>(c, 7);
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n;
    Mat<double> q1(4, c.text_dim), q2(2, c.text_dim);
    for (auto* m : {&q1, &q2})
        for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = n(rng);
    Tape<double> tape;
    LmrGraph<double> g(c, params, tape, {}, false);
    const Var w1 = g.project_text(g.input(q1)), w2 = g.project_text(g.input(q2));
    const Mat<double> m1 = tape.value(g.moment_queries(w1));
    const Mat<double> m2 = tape.value(g.moment_queries(w2));
    const Mat<double> pooled = tape.value(w1).colwise().mean();
    const auto pos = params.view("decoder.query_pos");
    REQUIRE(m1.rows() == c.k_moment_queries);
    for (Eigen::Index r = 0; r < m1.rows(); ++r) {
        CHECK((m1.row(r) - pooled - pos.row(r)).norm() < 1e-12);
        CHECK(((m1.row(r) - m2.row(r)) - (m1.row(0) - m2.row(0))).norm() < 1e-12);
    }

    auto one = c;
    one.k_moment_queries = 1;
    const auto p1 = init_params<double>(one, 7);
    Tape<double> t1;
    LmrGraph<double> g1(one, p1, t1, {}, false);
    const Mat<double> single = t1.value(g1.moment_queries(g1.project_text(g1.input(q1))));
    CHECK(single.rows() == 1);
    CHECK((single.row(0) - pooled - p1.view("decoder.query_pos").row(0)).norm() < 1e-12);
}

TEST_CASE("changing k leaves the encoder untouched") {
    auto a = small_config();
    auto b = a;
    b.k_moment_queries = 7;
    const auto pa = init_params<float>(a, 9), pb = init_params<float>(b, 9);
    const auto in = random_inputs(a, 11);
    const auto oa = forward<float>(a, pa, in.visual, in.context, in.query);
    const auto ob = forward<float>(b, pb, in.visual, in.context, in.query);
    CHECK(oa.encoder_seq == ob.encoder_seq);
    CHECK(oa.relevance == ob.relevance);
    CHECK(ob.moments.rows() == 7);
}

TEST_CASE("VQF reduces to a layer norm when its MLP output is zero") {
    auto c = small_config();
    c.vqf_layers = 1;
    auto params = init_params<double>(c, 10);
    params.view("vqf.0.mlp2.w").setZero();
    params.view("vqf.0.mlp2.b").setZero();
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n;
    Mat<double> s(5, c.hidden_dim), q(3, c.hidden_dim);
    for (auto* m : {&s, &q})
        for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = n(rng);
    Tape<double> tape;
    LmrGraph<double> g(c, params, tape, {}, false);
    const Mat<double> out = tape.value(g.vqf(g.input(s), g.input(q)));
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
        const double mean = s.row(r).mean();
        const double var = (s.row(r).array() - mean).square().mean();
        const Mat<double> expect = (s.row(r).array() - mean) / std::sqrt(var + 1e-5);
        CHECK((out.row(r) - expect).norm() < 1e-9);
    }
}

TEST_CASE("both streams run through one VQF weight set") {
    const auto c = small_config();
    const auto layout = make_layout(c);
    for (const auto& p : layout.params()) {
        CHECK(p.name.find("vqf.visual") == std::string::npos);
        CHECK(p.name.find("vqf.context") == std::string::npos);
    }
    auto params = init_params<double>(c, 12);
    std::mt19937_64 rng(13);
    std::normal_distribution<double> n;
    Mat<double> s(4, c.hidden_dim), q(3, c.hidden_dim);
    for (auto* m : {&s, &q})
        for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = n(rng);
    auto run = [&](const ParamStore<double>& p) {
        Tape<double> tape;
        LmrGraph<double> g(c, p, tape, {}, false);
        const Mat<double> a = tape.value(g.vqf(g.input(s), g.input(q)));
        const Mat<double> b = tape.value(g.vqf(g.input(s), g.input(q)));
        return std::pair{a, b};
    };
    const auto [a0, b0] = run(params);
    CHECK(a0 == b0);
    params.view("vqf.0.q.w")(0, 0) += 0.5;
    const auto [a1, b1] = run(params);
    CHECK(a1 == b1);
    CHECK((a1 - a0).norm() > 0.0);
}

TEST_CASE("parameter flatten and unflatten are inverse") {
    const auto c = small_config();
    const auto p = init_params<float>(c, 14);
    ParamStore<float> q(make_layout(c));
    q.unflatten(p.flatten());
    CHECK(q == p);
    CHECK(p.flatten().size() == make_layout(c).total_size());
    std::vector<float> wrong(p.flatten().size() + 1);
    CHECK_THROWS_AS(q.unflatten(wrong), ShapeError);
    // Init is seeded per parameter name and agrees across precisions.
    const auto d = init_params<double>(c, 14);
    for (std::size_t i = 0; i < p.flat().size(); ++i) CHECK(float(d.flat()[i]) == p.flat()[i]);
    check_finite(p);
}

TEST_CASE("decoder and head gradients match central differences") {
    const auto setup = tiny_grad_check_setup(3);
    for (const char* prefix : {"decoder.", "head.class", "vqf.", "saliency."}) {
        GradCheckOptions o;
        o.probes = 40;
        o.seed = 5;
        o.name_prefix = prefix;
        const auto r = grad_check(setup, o);
        CAPTURE(prefix);
        CHECK(r.passed);
        CHECK(r.max_rel_error < 1e-4);
        for (const auto& p : r.probes) CHECK(p.param.rfind(prefix, 0) == 0);
    }
}

TEST_CASE("full tiny-model gradient check") {
    const auto r = grad_check(tiny_grad_check_setup(0));
    CHECK(r.probes.size() == 200);
    CHECK(r.passed);
    CHECK(r.max_rel_error < 1e-4);
}
