#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "samga/data.hpp"
#include "test_util.hpp"

#include <Eigen/QR>

#include <fstream>
#include <set>

using namespace samga;

namespace {

SynthConfig small_config() {
  SynthConfig c;
  c.subjects = 3;
  c.concepts = 20;
  c.images_per_concept = 2;
  c.trials_per_image = 2;
  c.channels = 4;
  c.time_samples = 8;
  return c;
}

}  // namespace

TEST_CASE("partition is disjoint, covers every concept, and is seeded") {
  const ConceptPartition a = partition_concepts(60, 0.2, 0.1, 11);
  const ConceptPartition b = partition_concepts(60, 0.2, 0.1, 11);
  CHECK(a.test == b.test);
  CHECK(a.val == b.val);
  CHECK(a.test.size() == 12);
  CHECK(a.val.size() == 5);
  std::set<ConceptId> all;
  for (const auto* part : {&a.train, &a.val, &a.test}) all.insert(part->begin(), part->end());
  CHECK(all.size() == 60);
  CHECK(a.train.size() + a.val.size() + a.test.size() == 60);
  CHECK(partition_concepts(60, 0.2, 0.1, 12).test != a.test);
}

TEST_CASE("partition rejects impossible sizes") {
  CHECK_THROWS_AS(partition_concepts(3, 0.1, 0.0, 0), DataError);
  CHECK_THROWS_AS(partition_concepts(2, 0.5, 0.9, 0), DataError);
}

TEST_CASE("generator is deterministic and seeds differ") {
  const auto a = generate_synthetic(small_config(), 5).dataset;
  const auto b = generate_synthetic(small_config(), 5).dataset;
  const auto c = generate_synthetic(small_config(), 6).dataset;
  CHECK(test_util::bitwise_equal(a.eeg, b.eeg));
  for (std::size_t k = 0; k < a.features.size(); ++k) CHECK(test_util::bitwise_equal(a.features[k], b.features[k]));
  CHECK_FALSE(test_util::bitwise_equal(a.eeg, c.eeg));
}

TEST_CASE("zero noise, zero deviation, one-hot global: every subject's weights are one-hot") {
  SynthConfig c = small_config();
  c.eeg_noise = 0.0;
  c.global_depth_logits = {-1e4, -1e4, -1e4, 0.0, -1e4};
  c.subject_deviation_logits.assign(c.subjects, std::vector<double>(5, 0.0));
  const auto ds = generate_synthetic(c, 1).dataset;
  for (int s = 0; s < c.subjects; ++s) {
    const Vec<double> beta = ds.manifest.planted_truth->depth_weights(s);
    for (int k = 0; k < 5; ++k) CHECK(beta[k] == doctest::Approx(k == 3 ? 1.0 : 0.0));
  }
}

TEST_CASE("least-squares oracle recovers planted weights from noiseless data") {
  SynthConfig c;  // default sizes
  c.eeg_noise = 0.0;
  const auto gen = generate_synthetic(c, 3);
  const Dataset& ds = gen.dataset;
  const int K = ds.manifest.K();
  const int dk = ds.manifest.layers[0].dim;
  const int n_img = ds.manifest.num_images();

  MatD X(n_img, K * dk);
  for (int i = 0; i < n_img; ++i)
    for (int k = 0; k < K; ++k) X.block(i, k * dk, 1, dk) = ds.features[k].row(i).cast<double>();

  for (int s = 0; s < ds.manifest.S; ++s) {
    MatD Y(n_img, ds.manifest.signal_dim());
    for (int n = 0; n < ds.num_trials(); ++n) {
      if (ds.labels[n].subject == s) Y.row(ds.labels[n].image) = ds.eeg.row(n).cast<double>();
    }
    const MatD coef = X.colPivHouseholderQr().solve(Y);  // [K*dk x signal_dim]
    // Each block is beta_k * B_s^T, so block norms are proportional to beta.
    Vec<double> norms(K);
    for (int k = 0; k < K; ++k) norms[k] = coef.middleRows(k * dk, dk).norm();
    const Vec<double> recovered = norms / norms.sum();
    const Vec<double> planted = ds.manifest.planted_truth->depth_weights(s);
    CAPTURE(s);
    CHECK((recovered - planted).cwiseAbs().maxCoeff() < 1e-6);
    Eigen::Index a = 0, b = 0;
    recovered.maxCoeff(&a);
    planted.maxCoeff(&b);
    CHECK(a == b);
  }
}

TEST_CASE("save/load round-trips bitwise") {
  const auto ds = generate_synthetic(small_config(), 9).dataset;
  test_util::TempDir dir;
  save_dataset(ds, dir.path);
  const Dataset back = load_dataset(dir.path / "manifest.json");
  CHECK(test_util::bitwise_equal(back.eeg, ds.eeg));
  REQUIRE(back.features.size() == ds.features.size());
  for (std::size_t k = 0; k < ds.features.size(); ++k) CHECK(test_util::bitwise_equal(back.features[k], ds.features[k]));
  REQUIRE(back.labels.size() == ds.labels.size());
  for (std::size_t n = 0; n < ds.labels.size(); ++n) {
    CHECK(back.labels[n].subject == ds.labels[n].subject);
    CHECK(back.labels[n].concept_id == ds.labels[n].concept_id);
    CHECK(back.labels[n].image == ds.labels[n].image);
    CHECK(back.labels[n].split == ds.labels[n].split);
  }
  CHECK(back.manifest.planted_truth->global_depth_logits == ds.manifest.planted_truth->global_depth_logits);
  CHECK(back.manifest.planted_truth->subject_deviation_logits == ds.manifest.planted_truth->subject_deviation_logits);
}

TEST_CASE("loader reports a wrong row width as a dimension mismatch") {
  const auto ds = generate_synthetic(small_config(), 2).dataset;
  test_util::TempDir dir;
  save_dataset(ds, dir.path);
  {
    // Rewrite eeg.bin with one fewer float per row.
    MatF cut = ds.eeg.leftCols(ds.eeg.cols() - 1);
    std::ofstream os(dir.path / "eeg.bin", std::ios::binary | std::ios::trunc);
    os.write(reinterpret_cast<const char*>(cut.data()), static_cast<std::streamsize>(cut.size() * sizeof(float)));
  }
  try {
    load_dataset(dir.path / "manifest.json");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("dimension mismatch") != std::string::npos);
    CHECK(msg.find("eeg") != std::string::npos);
  }
}

TEST_CASE("loader rejects a corrupted payload and a missing file") {
  const auto ds = generate_synthetic(small_config(), 2).dataset;
  test_util::TempDir dir;
  save_dataset(ds, dir.path);
  {
    std::fstream f(dir.path / "feat_layer_20.bin", std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(16);
    const float junk = 123.0f;
    f.write(reinterpret_cast<const char*>(&junk), sizeof junk);
  }
  CHECK_THROWS_AS(load_dataset(dir.path / "manifest.json"), DataError);
  std::filesystem::remove(dir.path / "feat_layer_20.bin");
  CHECK_THROWS_AS(load_dataset(dir.path / "manifest.json"), DataError);
}

TEST_CASE("splits are zero-shot and respect the mode") {
  const auto ds = generate_synthetic(small_config(), 4).dataset;
  const SplitPlan intra = make_split(ds, SplitMode::intra_subject, 1);
  std::set<ConceptId> train_c, test_c;
  for (int n : intra.train) {
    CHECK(ds.labels[n].subject == 1);
    train_c.insert(ds.labels[n].concept_id);
  }
  for (int n : intra.test) {
    CHECK(ds.labels[n].subject == 1);
    test_c.insert(ds.labels[n].concept_id);
  }
  for (ConceptId p : test_c) CHECK(train_c.count(p) == 0);
  CHECK(intra.test_images.size() == test_c.size() * 2);

  const SplitPlan loso = make_split(ds, SplitMode::leave_one_subject_out, 2);
  for (int n : loso.train) CHECK(ds.labels[n].subject != 2);
  for (int n : loso.val) CHECK(ds.labels[n].subject != 2);
  for (int n : loso.test) CHECK(ds.labels[n].subject == 2);
  CHECK(loso.test_images == intra.test_images);
}

TEST_CASE("config validation names the offending key") {
  SynthConfig c = small_config();
  c.layer_ids.clear();
  c.layer_dims.clear();
  c.global_depth_logits.clear();
  c.concept_signal.clear();
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("data.layer_ids"), DataError);
  SynthConfig d = small_config();
  d.global_depth_logits.pop_back();
  CHECK_THROWS_WITH_AS(d.validate(), doctest::Contains("global_depth_logits"), DataError);
}
