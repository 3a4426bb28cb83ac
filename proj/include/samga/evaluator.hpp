#pragma once

// Zero-shot retrieval metrics and the representation analyses built on the
// shared embedding space.

#include "samga/data.hpp"
#include "samga/model.hpp"

#include <optional>
#include <vector>

namespace samga {

struct RetrievalResult {
  std::vector<int> k_list;       // ascending
  std::vector<double> topk;      // accuracy per k
  int n_way = 0;
  int n_queries = 0;
  std::vector<int> true_rank;    // 0-based rank of the correct candidate per query
  std::vector<std::vector<int>> ranked;  // candidate indices, best first, per query

  double at(int k) const;
  double top1() const { return at(1); }
  double top5() const { return at(5); }
};

// Ranks candidates for each query by cosine similarity; ties go to the lower
// candidate index. `truth[i]` is the index of query i's correct candidate.
RetrievalResult rank_by_cosine(const MatD& queries, const MatD& candidates, const std::vector<int>& truth,
                               std::vector<int> k_list);

// Sorted, de-duplicated, positive k values; throws on an empty list.
std::vector<int> normalize_k_list(std::vector<int> k_list);

// Test-time retrieval: EEG trials against fused image targets built with
// inference routing.
RetrievalResult evaluate_retrieval(const ModelParams<float>& model, const Dataset& ds,
                                   const std::vector<int>& trials, const std::vector<ImageId>& candidates,
                                   std::vector<int> k_list = {1, 5});

// Top-1 accuracy per category for the queries of `result` (NaN when a
// category has no queries).
std::vector<double> per_category_top1(const RetrievalResult& result, const Dataset& ds,
                                      const std::vector<int>& trials);

MatD eeg_embeddings(const ModelParams<float>& model, const Dataset& ds, const std::vector<int>& trials);
MatD image_embeddings(const ModelParams<float>& model, const Dataset& ds, const std::vector<ImageId>& images);

struct ConceptSimilarity {
  MatD matrix;
  std::vector<ConceptId> concepts;
  std::vector<CategoryId> categories;
};

// Mean EEG embedding per test concept over all subjects' test trials, then
// pairwise cosine similarity.
ConceptSimilarity concept_similarity_matrix(const ModelParams<float>& model, const Dataset& ds, bool center,
                                            bool order_by_category);

// Same computation on precomputed concept embeddings (rows).
ConceptSimilarity concept_similarity_from_embeddings(const MatD& concept_embeddings,
                                                     std::vector<ConceptId> concepts,
                                                     std::vector<CategoryId> categories, bool center,
                                                     bool order_by_category);

// Mean concept-pair similarity per category pair, excluding self-pairs; NaN
// where a pair has no concepts.
MatD category_similarity_matrix(const MatD& concept_matrix, const std::vector<CategoryId>& categories,
                                int n_categories);

struct RoutingReport {
  MatD deviation;                    // [S x K]
  Vec<double> global_weights;        // inference routing
  std::optional<bool> global_argmax_match;
  int learned_argmax = 0;
  std::optional<int> planted_argmax;
  std::vector<std::optional<double>> spearman;  // per subject; empty when undefined
  std::optional<double> mean_spearman;
};

// `trained_subjects` restricts the correlation average (held-out subjects never
// receive a bias); empty means all subjects.
RoutingReport routing_report(const ModelParams<float>& model, const DatasetManifest& manifest,
                             const std::vector<SubjectId>& trained_subjects = {});

// Spearman rank correlation with average ranks for ties; nullopt when either
// side is constant.
std::optional<double> spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace samga
