#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "samga/rng.hpp"
#include "samga/target.hpp"

using namespace samga;

namespace {

Vec<double> vec(std::initializer_list<double> xs) {
  Vec<double> v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

// Triple-loop reference for X * W^T + b.
MatD naive_affine(const MatD& X, const MatD& W, const Vec<double>& b) {
  MatD out(X.rows(), W.rows());
  for (Eigen::Index n = 0; n < X.rows(); ++n)
    for (Eigen::Index o = 0; o < W.rows(); ++o) {
      double acc = b[o];
      for (Eigen::Index i = 0; i < X.cols(); ++i) acc += X(n, i) * W(o, i);
      out(n, o) = acc;
    }
  return out;
}

}  // namespace

TEST_CASE("initial depth prior gives the expected routing distribution") {
  Router<double> r(1, 5);
  CHECK(r.q.isApprox(vec({-2, -1, 0, -1, -2})));
  const Vec<double> w = route_infer(r);
  const double expected[] = {0.0675, 0.1834, 0.4984, 0.1834, 0.0675};
  for (int k = 0; k < 5; ++k) CHECK(w[k] == doctest::Approx(expected[k]).epsilon(1e-3));
  CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("large temperature approaches uniform") {
  Router<double> r(1, 5);
  r.tau = 1e6;
  const Vec<double> w = route_infer(r);
  for (int k = 0; k < 5; ++k) CHECK(std::abs(w[k] - 0.2) < 1e-6);
}

TEST_CASE("layer mask renormalizes, subject drop removes the bias") {
  Router<double> r(2, 3);
  r.q = vec({0.0, 0.0, 0.0});
  r.b.row(1) = vec({3.0, 0.0, 0.0}).transpose();
  const auto d = route_with_masks(r, 1, 1, vec({0, 1, 1}));
  CHECK(d.alpha_hat[0] == 0.0);
  CHECK(d.alpha_hat[1] == doctest::Approx(0.5));
  CHECK(d.alpha_hat.sum() == doctest::Approx(1.0).epsilon(1e-7));
  const auto dropped = route_with_masks(r, 1, 0, vec({1, 1, 1}));
  for (int k = 0; k < 3; ++k) CHECK(dropped.alpha[k] == doctest::Approx(1.0 / 3));
}

TEST_CASE("all layers masked gives a zero target") {
  Router<double> r(1, 3);
  const auto d = route_with_masks(r, 0, 1, vec({0, 0, 0}));
  CHECK(d.alpha_hat.isZero());
  const std::vector<Vec<double>> h{vec({1, 2}), vec({3, 4}), vec({5, 6})};
  CHECK(fuse_target(d.alpha_hat, h).isZero());
}

TEST_CASE("training draws are reproducible and respect the rates") {
  Router<double> r(1, 5);
  r.p_subject = 0.3;
  r.p_layer = 0.25;
  Engine a = make_engine(1, "dropout"), b = make_engine(1, "dropout");
  int subject_kept = 0, layers_kept = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto da = route_train(r, 0, a);
    const auto db = route_train(r, 0, b);
    CHECK(da.r == db.r);
    CHECK(da.mask == db.mask);
    subject_kept += da.r;
    layers_kept += static_cast<int>(da.mask.sum());
  }
  CHECK(subject_kept / double(n) == doctest::Approx(0.7).epsilon(0.03));
  CHECK(layers_kept / double(5 * n) == doctest::Approx(0.75).epsilon(0.02));
  CHECK_THROWS_AS(route_train(r, 3, a), std::out_of_range);
}

TEST_CASE("fixed weights bypass dropout and the subject term") {
  Router<double> r(2, 3);
  r.fixed_weights = vec({0, 1, 0});
  r.b.setConstant(5.0);
  const auto d = route_with_masks(r, 1, 1, vec({0, 0, 0}));
  CHECK(d.alpha_hat == vec({0, 1, 0}));
  CHECK(route_infer(r) == vec({0, 1, 0}));
  CHECK_FALSE(r.trainable());
}

TEST_CASE("fusion is the weighted sum") {
  const std::vector<Vec<double>> h{vec({1, 0}), vec({0, 1}), vec({2, 2})};
  CHECK(fuse_target(vec({0.5, 0.25, 0.25}), h).isApprox(vec({1.0, 0.75})));
  CHECK_THROWS_AS(fuse_target(vec({1, 0}), h), DimensionError);
}

TEST_CASE("identity projector leaves features unchanged") {
  LayerProjectorBank<double> bank;
  Affine<double> id(3, 3);
  id.W.setIdentity();
  id.b.setZero();
  bank.layers = {id, id};
  const std::vector<Vec<double>> h{vec({1, 2, 3}), vec({-1, 0, 4})};
  const auto out = project_layer_features(bank, h);
  CHECK(out[0] == h[0]);
  CHECK(out[1] == h[1]);
}

TEST_CASE("affine forward and backward match a naive reference") {
  Engine rng = make_engine(3, "test");
  Affine<double> a(4, 6);
  a.init_glorot(rng);
  for (Eigen::Index i = 0; i < a.b.size(); ++i) a.b[i] = gaussian<double>(rng);
  MatD X(5, 6), dY(5, 4);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = gaussian<double>(rng);
  for (Eigen::Index i = 0; i < dY.size(); ++i) dY.data()[i] = gaussian<double>(rng);
  CHECK((a.forward(X) - naive_affine(X, a.W, a.b)).cwiseAbs().maxCoeff() < 1e-12);

  Affine<double> g(4, 6);
  g.W.setZero();
  g.b.setZero();
  const MatD dX = a.backward(X, dY, g);
  for (Eigen::Index o = 0; o < 4; ++o)
    for (Eigen::Index i = 0; i < 6; ++i) {
      double acc = 0;
      for (Eigen::Index n = 0; n < 5; ++n) acc += dY(n, o) * X(n, i);
      CHECK(g.W(o, i) == doctest::Approx(acc).epsilon(1e-12));
    }
  for (Eigen::Index n = 0; n < 5; ++n)
    for (Eigen::Index i = 0; i < 6; ++i) {
      double acc = 0;
      for (Eigen::Index o = 0; o < 4; ++o) acc += dY(n, o) * a.W(o, i);
      CHECK(dX(n, i) == doctest::Approx(acc).epsilon(1e-12));
    }
}

TEST_CASE("deviation rows sum to zero and track a dominant bias") {
  Router<double> r(3, 5);
  r.b.row(1) = vec({0, 0, 0, 8, 0}).transpose();
  r.b.row(2) = vec({0.3, -0.2, 0.1, 0.4, -1.0}).transpose();
  const MatD dev = routing_deviation(r);
  for (int s = 0; s < 3; ++s) CHECK(std::abs(dev.row(s).sum()) < 1e-10);
  CHECK(dev.row(0).isZero());
  CHECK(dev(1, 3) > 0);
  for (int k = 0; k < 5; ++k)
    if (k != 3) CHECK(dev(1, k) <= 0);
}

TEST_CASE("constant logit shifts leave routing unchanged") {
  Router<double> r(2, 5);
  r.b.row(1) = vec({0.5, -0.1, 0.2, 1.0, 0.0}).transpose();
  Router<double> shifted = r;
  shifted.q.array() += 3.7;
  shifted.b.row(1).array() -= 1.25;
  CHECK((route_infer(r) - route_infer(shifted)).cwiseAbs().maxCoeff() < 1e-12);
  const auto a = route_with_masks(r, 1, 1, vec({1, 0, 1, 1, 1}));
  const auto b = route_with_masks(shifted, 1, 1, vec({1, 0, 1, 1, 1}));
  CHECK((a.alpha_hat - b.alpha_hat).cwiseAbs().maxCoeff() < 1e-12);
}
