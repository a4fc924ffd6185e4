#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cir/composer.hpp"
#include "cir/embedding_io.hpp"
#include "cir/matrix.hpp"

namespace cir {

// Candidate gallery. Ids are unique and rows unit length.
class RetrievalIndex {
 public:
  RetrievalIndex(std::vector<std::string> ids, EmbeddingMatrix embeddings);
  static RetrievalIndex from_table(const EmbeddingTable& table);

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dim() const noexcept { return embeddings_.dim(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const EmbeddingMatrix& embeddings() const noexcept { return embeddings_; }

  std::optional<std::size_t> find(const std::string& id) const;
  UnitEmbedding embedding(const std::string& id) const;

 private:
  std::vector<std::string> ids_;
  EmbeddingMatrix embeddings_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

using Ranking = std::vector<std::string>;
using IdSet = std::set<std::string>;

// Ids by cosine similarity to q, descending; excluded ids dropped; ties by id.
Ranking rank(const RetrievalIndex& index, const UnitEmbedding& q, const IdSet& exclude = {});

// Like rank() but restricted to `candidates` (ids not in the index are an error).
Ranking rank_within(const RetrievalIndex& index, const UnitEmbedding& q, std::span<const std::string> candidates,
                    const IdSet& exclude = {});

// Fraction of queries with at least one ground-truth id in the top k.
double recall_at_k(std::span<const Ranking> rankings, std::span<const IdSet> ground_truths, std::size_t k);

// AP@k = sum_{i<=k} P@i * rel(i) / min(k, |GT|), averaged over queries.
double average_precision_at_k(const Ranking& ranking, const IdSet& ground_truth, std::size_t k);
double map_at_k(std::span<const Ranking> rankings, std::span<const IdSet> ground_truths, std::size_t k);

struct QueryRecord {
  std::string query_id;
  std::optional<std::string> reference_id;
  std::optional<std::string> text;
  IdSet ground_truth_ids;
  std::optional<std::vector<std::string>> subset_ids;
};

// Checks ids against the index and reference_id not in ground truth.
void validate_query(const QueryRecord& q, const RetrievalIndex& index);

// Recall@k with ranking restricted to each query's subset_ids (reference
// excluded). Throws MissingSubset for a query without a subset.
double recall_subset_at_k(const RetrievalIndex& index, std::span<const QueryRecord> queries,
                          std::span<const UnitEmbedding> composed, std::size_t k);

struct MetricReport {
  std::map<std::size_t, double> recall_at;
  std::optional<std::map<std::size_t, double>> recall_subset_at;
  std::map<std::size_t, double> map_at;
  std::size_t num_queries = 0;

  double recall_sum() const;
};

// Composes each query, ranks the index without its reference image and
// aggregates Recall@k, Recall_subset@k (when every query has a subset) and mAP@k.
MetricReport evaluate(const ComposerParams& params, std::span<const QueryRecord> queries, const RetrievalIndex& index,
                      std::span<const std::size_t> ks);

// Same aggregation for precomputed composed queries.
MetricReport evaluate_composed(std::span<const QueryRecord> queries, std::span<const UnitEmbedding> composed,
                               const RetrievalIndex& index, std::span<const std::size_t> ks);

}  // namespace cir
