#include "samga/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

namespace samga {

double RetrievalResult::at(int k) const {
  for (std::size_t i = 0; i < k_list.size(); ++i) {
    if (k_list[i] == k) return topk[i];
  }
  // Not requested explicitly: derive from the stored ranks.
  if (true_rank.empty()) return 0.0;
  int hits = 0;
  for (int r : true_rank) hits += r < k ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(true_rank.size());
}

std::vector<int> normalize_k_list(std::vector<int> k_list) {
  if (k_list.empty()) throw std::invalid_argument("k list must not be empty");
  for (int k : k_list) {
    if (k <= 0) throw std::invalid_argument("k values must be positive");
  }
  std::sort(k_list.begin(), k_list.end());
  k_list.erase(std::unique(k_list.begin(), k_list.end()), k_list.end());
  return k_list;
}

RetrievalResult rank_by_cosine(const MatD& queries, const MatD& candidates, const std::vector<int>& truth,
                               std::vector<int> k_list) {
  require_dims(queries.cols() == candidates.cols(), "query and candidate embedding widths differ");
  require_dims(static_cast<Eigen::Index>(truth.size()) == queries.rows(), "one truth index per query");
  const MatD q = normalize_rows<double>(queries, "query embedding");
  const MatD c = normalize_rows<double>(candidates, "candidate embedding");
  const MatD scores = q * c.transpose();

  RetrievalResult res;
  res.k_list = normalize_k_list(std::move(k_list));
  res.n_way = static_cast<int>(candidates.rows());
  res.n_queries = static_cast<int>(queries.rows());
  std::vector<int> hits(res.k_list.size(), 0);
  std::vector<int> order(static_cast<std::size_t>(res.n_way));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores(i, a) > scores(i, b); });
    const int rank = static_cast<int>(std::find(order.begin(), order.end(), truth[i]) - order.begin());
    if (rank >= res.n_way) throw std::out_of_range("truth index outside candidate set");
    res.true_rank.push_back(rank);
    res.ranked.push_back(order);
    for (std::size_t j = 0; j < res.k_list.size(); ++j) hits[j] += rank < res.k_list[j] ? 1 : 0;
  }
  for (int h : hits) res.topk.push_back(res.n_queries ? static_cast<double>(h) / res.n_queries : 0.0);
  return res;
}

MatD eeg_embeddings(const ModelParams<float>& model, const Dataset& ds, const std::vector<int>& trials) {
  MatF signals(static_cast<Eigen::Index>(trials.size()), ds.eeg.cols());
  for (std::size_t i = 0; i < trials.size(); ++i) signals.row(static_cast<Eigen::Index>(i)) = ds.eeg.row(trials[i]);
  return embed_eeg(model, signals).cast<double>();
}

MatD image_embeddings(const ModelParams<float>& model, const Dataset& ds, const std::vector<ImageId>& images) {
  std::vector<MatF> feats;
  for (const auto& layer : ds.features) {
    MatF f(static_cast<Eigen::Index>(images.size()), layer.cols());
    for (std::size_t i = 0; i < images.size(); ++i) f.row(static_cast<Eigen::Index>(i)) = layer.row(images[i]);
    feats.push_back(std::move(f));
  }
  return embed_images(model, feats).cast<double>();
}

RetrievalResult evaluate_retrieval(const ModelParams<float>& model, const Dataset& ds, const std::vector<int>& trials,
                                   const std::vector<ImageId>& candidates, std::vector<int> k_list) {
  std::map<ImageId, int> slot;
  for (std::size_t i = 0; i < candidates.size(); ++i) slot[candidates[i]] = static_cast<int>(i);
  std::vector<int> truth;
  truth.reserve(trials.size());
  for (int n : trials) {
    auto it = slot.find(ds.labels.at(n).image);
    if (it == slot.end()) throw std::invalid_argument("trial " + std::to_string(n) + " has no candidate image");
    truth.push_back(it->second);
  }
  return rank_by_cosine(eeg_embeddings(model, ds, trials), image_embeddings(model, ds, candidates), truth,
                        std::move(k_list));
}

std::vector<double> per_category_top1(const RetrievalResult& result, const Dataset& ds,
                                      const std::vector<int>& trials) {
  const int G = ds.manifest.num_categories();
  std::vector<int> hits(G, 0), counts(G, 0);
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const int g = ds.labels.at(trials[i]).category;
    ++counts[g];
    hits[g] += result.true_rank.at(i) == 0 ? 1 : 0;
  }
  std::vector<double> acc(G);
  for (int g = 0; g < G; ++g)
    acc[g] = counts[g] ? static_cast<double>(hits[g]) / counts[g] : std::numeric_limits<double>::quiet_NaN();
  return acc;
}

ConceptSimilarity concept_similarity_from_embeddings(const MatD& emb, std::vector<ConceptId> concepts,
                                                     std::vector<CategoryId> categories, bool center,
                                                     bool order_by_category) {
  const auto n = static_cast<Eigen::Index>(concepts.size());
  require_dims(emb.rows() == n && static_cast<Eigen::Index>(categories.size()) == n,
               "one embedding and category per concept");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  if (order_by_category) {
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return std::pair(categories[a], concepts[a]) < std::pair(categories[b], concepts[b]);
    });
  }
  MatD ordered(n, emb.cols());
  ConceptSimilarity out;
  for (Eigen::Index i = 0; i < n; ++i) {
    ordered.row(i) = emb.row(order[i]);
    out.concepts.push_back(concepts[order[i]]);
    out.categories.push_back(categories[order[i]]);
  }
  const MatD unit = normalize_rows<double>(ordered, "concept embedding");
  out.matrix = unit * unit.transpose();
  // Exact symmetry and unit diagonal regardless of rounding.
  out.matrix = 0.5 * (out.matrix + out.matrix.transpose()).eval();
  out.matrix.diagonal().setOnes();
  if (center && n > 1) {
    const double off_mean = (out.matrix.sum() - out.matrix.trace()) / static_cast<double>(n * (n - 1));
    out.matrix.array() -= off_mean;
  }
  return out;
}

ConceptSimilarity concept_similarity_matrix(const ModelParams<float>& model, const Dataset& ds, bool center,
                                            bool order_by_category) {
  std::map<ConceptId, std::vector<int>> by_concept;
  for (int n = 0; n < ds.num_trials(); ++n) {
    if (ds.labels[n].split == Split::test) by_concept[ds.labels[n].concept_id].push_back(n);
  }
  std::set<ConceptId> test_concepts;
  for (const auto& l : ds.labels)
    if (l.split == Split::test) test_concepts.insert(l.concept_id);
  if (test_concepts.empty()) throw std::invalid_argument("dataset has no test concepts");

  MatD emb(static_cast<Eigen::Index>(test_concepts.size()), model.spec.d_z);
  std::vector<ConceptId> concepts;
  std::vector<CategoryId> categories;
  Eigen::Index row = 0;
  for (ConceptId p : test_concepts) {
    const auto& trials = by_concept[p];
    if (trials.empty()) throw std::invalid_argument("concept " + std::to_string(p) + " has no trials");
    emb.row(row++) = eeg_embeddings(model, ds, trials).colwise().mean();
    concepts.push_back(p);
    categories.push_back(ds.manifest.categories.at(p));
  }
  return concept_similarity_from_embeddings(emb, concepts, categories, center, order_by_category);
}

MatD category_similarity_matrix(const MatD& cm, const std::vector<CategoryId>& categories, int n_categories) {
  require_dims(cm.rows() == cm.cols() && static_cast<Eigen::Index>(categories.size()) == cm.rows(),
               "category map must cover every concept");
  MatD sum = MatD::Zero(n_categories, n_categories);
  MatD count = MatD::Zero(n_categories, n_categories);
  for (Eigen::Index i = 0; i < cm.rows(); ++i) {
    for (Eigen::Index j = 0; j < cm.cols(); ++j) {
      if (i == j) continue;
      sum(categories[i], categories[j]) += cm(i, j);
      count(categories[i], categories[j]) += 1.0;
    }
  }
  MatD out(n_categories, n_categories);
  for (int g = 0; g < n_categories; ++g) {
    for (int h = 0; h < n_categories; ++h) {
      out(g, h) = count(g, h) > 0.0 ? sum(g, h) / count(g, h) : std::numeric_limits<double>::quiet_NaN();
    }
  }
  return out;
}

namespace {
std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j);
    for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = r;
    i = j + 1;
  }
  return ranks;
}
}  // namespace

std::optional<double> spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) return std::nullopt;
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0.0 || vb == 0.0) return std::nullopt;
  return cov / std::sqrt(va * vb);
}

RoutingReport routing_report(const ModelParams<float>& model, const DatasetManifest& manifest,
                             const std::vector<SubjectId>& trained_subjects) {
  const Router<double> router = model.router.cast<double>();
  RoutingReport rep;
  rep.deviation = routing_deviation(router);
  rep.global_weights = route_infer(router);
  rep.global_weights.maxCoeff(&rep.learned_argmax);
  rep.spearman.assign(static_cast<std::size_t>(router.S()), std::nullopt);
  if (!manifest.planted_truth) return rep;

  const PlantedTruth& truth = *manifest.planted_truth;
  const Vec<double> g = Eigen::Map<const Vec<double>>(truth.global_depth_logits.data(),
                                                      static_cast<Eigen::Index>(truth.global_depth_logits.size()));
  const Vec<double> planted_global = softmax<double>(g);
  int planted = 0;
  planted_global.maxCoeff(&planted);
  rep.planted_argmax = planted;
  rep.global_argmax_match = planted == rep.learned_argmax;

  std::vector<SubjectId> subjects = trained_subjects;
  if (subjects.empty()) {
    subjects.resize(static_cast<std::size_t>(router.S()));
    std::iota(subjects.begin(), subjects.end(), 0);
  }
  double sum = 0.0;
  int count = 0;
  for (SubjectId s : subjects) {
    Vec<double> logits = g;
    for (Eigen::Index k = 0; k < g.size(); ++k) logits[k] += truth.subject_deviation_logits.at(s)[k];
    const Vec<double> planted_dev = softmax<double>(logits) - planted_global;
    std::vector<double> a(rep.deviation.cols()), b(planted_dev.size());
    for (Eigen::Index k = 0; k < rep.deviation.cols(); ++k) a[k] = rep.deviation(s, k);
    for (Eigen::Index k = 0; k < planted_dev.size(); ++k) b[k] = planted_dev[k];
    rep.spearman[s] = spearman(a, b);
    if (rep.spearman[s]) {
      sum += *rep.spearman[s];
      ++count;
    }
  }
  if (count > 0) rep.mean_spearman = sum / count;
  return rep;
}

}  // namespace samga
