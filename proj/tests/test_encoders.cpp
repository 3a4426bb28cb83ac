#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "samga/model.hpp"

using namespace samga;

namespace {

ModelSpec spec(ProjectorKind kind, int hidden) {
  ModelSpec s;
  s.subjects = 2;
  s.layer_dims = {4, 4};
  s.signal_dim = 6;
  s.d_common = 4;
  s.d_z = 3;
  s.eeg_hidden_dim = hidden;
  s.projector = kind;
  return s;
}

}  // namespace

TEST_CASE("direct projector without hidden layer takes the leading entries") {
  const auto p = init_model<double>(spec(ProjectorKind::direct, 0), RouterSettings{}, 0.07, 1);
  Vec<double> x(6);
  x << 1, 2, 3, 4, 5, 6;
  const Vec<double> u = encode_eeg(p.eeg, x);
  REQUIRE(u.size() == 4);
  CHECK(u == x.head(4));
}

TEST_CASE("direct projector zero-fills when the input is narrower") {
  ModelSpec s = spec(ProjectorKind::direct, 0);
  s.signal_dim = 2;
  const auto p = init_model<double>(s, RouterSettings{}, 0.07, 1);
  Vec<double> x(2);
  x << 7, 8;
  Vec<double> expected(4);
  expected << 7, 8, 0, 0;
  CHECK(encode_eeg(p.eeg, x) == expected);
}

TEST_CASE("encoder output width is d_common for every projector") {
  for (auto kind : {ProjectorKind::direct, ProjectorKind::linear, ProjectorKind::mlp}) {
    for (int hidden : {0, 5}) {
      const auto p = init_model<double>(spec(kind, hidden), RouterSettings{}, 0.07, 2);
      CHECK(encode_eeg(p.eeg, Vec<double>(Vec<double>::Ones(6))).size() == 4);
      CHECK(encode_shared(p.shared, Vec<double>(Vec<double>::Ones(4))).size() == 3);
    }
  }
}

TEST_CASE("wrong input width is a dimension error") {
  const auto p = init_model<double>(spec(ProjectorKind::linear, 0), RouterSettings{}, 0.07, 1);
  CHECK_THROWS_AS(encode_eeg(p.eeg, Vec<double>(Vec<double>::Ones(5))), DimensionError);
}

TEST_CASE("shared encoder applies one map to both modalities") {
  const auto p = init_model<double>(spec(ProjectorKind::linear, 0), RouterSettings{}, 0.07, 4);
  Vec<double> u(4);
  u << 0.1, -0.2, 0.3, 0.5;
  const Vec<double> z = encode_shared(p.shared, u);
  CHECK((z - (p.shared.map.W * u + p.shared.map.b)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("projector names round-trip") {
  for (auto kind : {ProjectorKind::direct, ProjectorKind::linear, ProjectorKind::mlp})
    CHECK(projector_from_string(to_string(kind)) == kind);
  CHECK_THROWS_AS(projector_from_string("conv"), std::invalid_argument);
}

TEST_CASE("block listing covers every parameter once with stable names") {
  const auto p = init_model<float>(spec(ProjectorKind::mlp, 5), RouterSettings{}, 0.07, 1);
  std::vector<std::string> names;
  std::size_t total = 0;
  p.for_each_block([&](const ParamView<const float>& v) {
    names.push_back(v.name);
    total += v.values.size();
  });
  const std::vector<std::string> expected{
      "projector.0.W", "projector.0.c", "projector.1.W",      "projector.1.c",      "router.q",
      "router.b",      "eeg.hidden.W",  "eeg.hidden.b",       "eeg.proj_hidden.W", "eeg.proj_hidden.b",
      "eeg.proj.W",    "eeg.proj.b",    "shared.G",           "shared.g0",          "head.log_tau"};
  CHECK(names == expected);
  const std::size_t want = 2 * (4 * 4 + 4) + 2 + 2 * 2 + (5 * 6 + 5) + (4 * 5 + 4) + (4 * 4 + 4) + (3 * 4 + 3) + 1;
  CHECK(total == want);
}

TEST_CASE("initialization is seeded") {
  const auto a = init_model<float>(spec(ProjectorKind::linear, 0), RouterSettings{}, 0.07, 9);
  const auto b = init_model<float>(spec(ProjectorKind::linear, 0), RouterSettings{}, 0.07, 9);
  const auto c = init_model<float>(spec(ProjectorKind::linear, 0), RouterSettings{}, 0.07, 10);
  CHECK(a.shared.map.W == b.shared.map.W);
  CHECK(a.shared.map.W != c.shared.map.W);
  CHECK(a.head.tau() == doctest::Approx(0.07f));
}
