#include "cir/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <numeric>

#include "cir/error.hpp"
#include "cir/kernels.hpp"

namespace cir {

RetrievalIndex::RetrievalIndex(std::vector<std::string> ids, EmbeddingMatrix embeddings)
    : ids_(std::move(ids)), embeddings_(std::move(embeddings)) {
  if (ids_.empty()) throw Error(ErrorKind::IndexTooSmall, "retrieval index is empty");
  if (ids_.size() != embeddings_.rows()) throw Error(ErrorKind::InvalidArgument, "ids and embeddings differ in count");
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!by_id_.emplace(ids_[i], i).second) throw Error(ErrorKind::InvalidArgument, "duplicate index id " + ids_[i]);
    if (std::abs(l2_norm(embeddings_.row(i)) - 1.0) > UnitEmbedding::kUnitTolerance) {
      throw Error(ErrorKind::InvalidArgument, "index row " + ids_[i] + " is not unit length");
    }
  }
}

RetrievalIndex RetrievalIndex::from_table(const EmbeddingTable& table) {
  std::vector<std::string> ids;
  ids.reserve(table.size());
  for (const auto& item : table.items()) ids.push_back(item.id);
  return RetrievalIndex(std::move(ids), table.matrix());
}

std::optional<std::size_t> RetrievalIndex::find(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

UnitEmbedding RetrievalIndex::embedding(const std::string& id) const {
  auto row = find(id);
  if (!row) throw Error(ErrorKind::UnknownId, id);
  return embeddings_.unit_row(*row);
}

namespace {

Ranking sort_candidates(const RetrievalIndex& index, std::vector<std::size_t> rows, const std::vector<double>& scores) {
  const auto& ids = index.ids();
  std::sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids[a] < ids[b];
  });
  Ranking out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(ids[r]);
  return out;
}

std::vector<double> clamped_scores(const RetrievalIndex& index, const UnitEmbedding& q) {
  if (q.dim() != index.dim()) throw Error(ErrorKind::DimMismatch, "query and index dimensions differ");
  auto scores = kernels::scores(index.embeddings(), q.values());
  for (double& s : scores) s = std::clamp(s, -1.0, 1.0);
  return scores;
}

void check_parallel_inputs(std::span<const Ranking> rankings, std::span<const IdSet> gts, std::size_t k) {
  if (k < 1) throw Error(ErrorKind::InvalidArgument, "k must be >= 1");
  if (rankings.size() != gts.size()) throw Error(ErrorKind::InvalidArgument, "rankings and ground truths differ");
  if (rankings.empty()) throw Error(ErrorKind::EmptyQuerySet, "no queries");
}

bool hit_in_top_k(const Ranking& ranking, const IdSet& gt, std::size_t k) {
  const std::size_t depth = std::min(k, ranking.size());
  for (std::size_t i = 0; i < depth; ++i) {
    if (gt.contains(ranking[i])) return true;
  }
  return false;
}

}  // namespace

Ranking rank(const RetrievalIndex& index, const UnitEmbedding& q, const IdSet& exclude) {
  const auto scores = clamped_scores(index, q);
  std::vector<std::size_t> rows;
  rows.reserve(index.size());
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (!exclude.contains(index.ids()[r])) rows.push_back(r);
  }
  return sort_candidates(index, std::move(rows), scores);
}

Ranking rank_within(const RetrievalIndex& index, const UnitEmbedding& q, std::span<const std::string> candidates,
                    const IdSet& exclude) {
  if (q.dim() != index.dim()) throw Error(ErrorKind::DimMismatch, "query and index dimensions differ");
  std::vector<double> scores(index.size(), 0.0);
  std::vector<std::size_t> rows;
  IdSet seen;
  for (const auto& id : candidates) {
    auto r = index.find(id);
    if (!r) throw Error(ErrorKind::UnknownId, id);
    if (exclude.contains(id) || !seen.insert(id).second) continue;
    scores[*r] = std::clamp(dot(index.embeddings().row(*r), q.values()), -1.0, 1.0);
    rows.push_back(*r);
  }
  return sort_candidates(index, std::move(rows), scores);
}

double recall_at_k(std::span<const Ranking> rankings, std::span<const IdSet> ground_truths, std::size_t k) {
  check_parallel_inputs(rankings, ground_truths, k);
  std::size_t hits = 0;
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    if (hit_in_top_k(rankings[q], ground_truths[q], k)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(rankings.size());
}

namespace {

// Extended-precision accumulation; rounding once at the end keeps hand-checkable
// cases such as (1 + 2/3) / 2 equal to the nearest double of the exact value.
long double average_precision_ld(const Ranking& ranking, const IdSet& ground_truth, std::size_t k) {
  if (k < 1) throw Error(ErrorKind::InvalidArgument, "k must be >= 1");
  if (ground_truth.empty()) throw Error(ErrorKind::InvalidArgument, "ground truth set is empty");
  const std::size_t depth = std::min(k, ranking.size());
  std::size_t hits = 0;
  long double sum = 0.0L;
  for (std::size_t i = 0; i < depth; ++i) {
    if (ground_truth.contains(ranking[i])) {
      ++hits;
      sum += static_cast<long double>(hits) / static_cast<long double>(i + 1);
    }
  }
  return sum / static_cast<long double>(std::min(k, ground_truth.size()));
}

}  // namespace

double average_precision_at_k(const Ranking& ranking, const IdSet& ground_truth, std::size_t k) {
  return static_cast<double>(average_precision_ld(ranking, ground_truth, k));
}

double map_at_k(std::span<const Ranking> rankings, std::span<const IdSet> ground_truths, std::size_t k) {
  check_parallel_inputs(rankings, ground_truths, k);
  long double sum = 0.0L;
  for (std::size_t q = 0; q < rankings.size(); ++q) sum += average_precision_ld(rankings[q], ground_truths[q], k);
  return static_cast<double>(sum / static_cast<long double>(rankings.size()));
}

void validate_query(const QueryRecord& q, const RetrievalIndex& index) {
  if (q.ground_truth_ids.empty()) throw Error(ErrorKind::InvalidArgument, q.query_id + ": empty ground truth");
  for (const auto& id : q.ground_truth_ids) {
    if (!index.find(id)) throw Error(ErrorKind::UnknownId, q.query_id + ": ground truth " + id);
  }
  if (q.reference_id) {
    if (!index.find(*q.reference_id)) throw Error(ErrorKind::UnknownId, q.query_id + ": reference " + *q.reference_id);
    if (q.ground_truth_ids.contains(*q.reference_id)) {
      throw Error(ErrorKind::InvalidArgument, q.query_id + ": reference is also a ground truth");
    }
  }
  if (!q.reference_id && !q.text) throw Error(ErrorKind::EmptyQuery, q.query_id);
}

double recall_subset_at_k(const RetrievalIndex& index, std::span<const QueryRecord> queries,
                          std::span<const UnitEmbedding> composed, std::size_t k) {
  if (k < 1) throw Error(ErrorKind::InvalidArgument, "k must be >= 1");
  if (queries.empty()) throw Error(ErrorKind::EmptyQuerySet, "no queries");
  if (queries.size() != composed.size()) throw Error(ErrorKind::InvalidArgument, "queries and embeddings differ");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto& q = queries[i];
    if (!q.subset_ids) throw Error(ErrorKind::MissingSubset, q.query_id);
    IdSet subset_gt;
    for (const auto& id : *q.subset_ids) {
      if (q.ground_truth_ids.contains(id)) subset_gt.insert(id);
    }
    if (subset_gt.empty()) throw Error(ErrorKind::MissingSubset, q.query_id + ": target not in subset");
    IdSet exclude;
    if (q.reference_id) exclude.insert(*q.reference_id);
    const auto ranking = rank_within(index, composed[i], *q.subset_ids, exclude);
    if (hit_in_top_k(ranking, subset_gt, k)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(queries.size());
}

double MetricReport::recall_sum() const {
  double s = 0.0;
  for (const auto& [k, v] : recall_at) s += v;
  if (recall_subset_at) {
    for (const auto& [k, v] : *recall_subset_at) s += v;
  }
  return s;
}

MetricReport evaluate_composed(std::span<const QueryRecord> queries, std::span<const UnitEmbedding> composed,
                               const RetrievalIndex& index, std::span<const std::size_t> ks) {
  if (queries.empty()) throw Error(ErrorKind::EmptyQuerySet, "no queries to evaluate");
  if (ks.empty()) throw Error(ErrorKind::InvalidArgument, "no k values requested");
  const std::size_t n = queries.size();
  std::vector<Ranking> rankings(n);
  std::vector<IdSet> gts(n);
  std::vector<std::exception_ptr> failures(n);
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      IdSet exclude;
      if (queries[i].reference_id) exclude.insert(*queries[i].reference_id);
      rankings[i] = rank(index, composed[i], exclude);
      gts[i] = queries[i].ground_truth_ids;
    } catch (...) {
      failures[i] = std::current_exception();
    }
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }

  const bool any_subset = std::any_of(queries.begin(), queries.end(), [](const auto& q) { return q.subset_ids; });
  const bool all_subset = std::all_of(queries.begin(), queries.end(), [](const auto& q) { return q.subset_ids; });
  if (any_subset && !all_subset) throw Error(ErrorKind::MissingSubset, "only some queries carry subset_ids");

  MetricReport report;
  report.num_queries = n;
  if (all_subset) report.recall_subset_at.emplace();
  for (std::size_t k : ks) {
    report.recall_at[k] = recall_at_k(rankings, gts, k);
    report.map_at[k] = map_at_k(rankings, gts, k);
    if (all_subset) (*report.recall_subset_at)[k] = recall_subset_at_k(index, queries, composed, k);
  }
  return report;
}

MetricReport evaluate(const ComposerParams& params, std::span<const QueryRecord> queries, const RetrievalIndex& index,
                      std::span<const std::size_t> ks) {
  if (queries.empty()) throw Error(ErrorKind::EmptyQuerySet, "no queries to evaluate");
  if (params.dims.output_dim != index.dim()) {
    throw Error(ErrorKind::DimMismatch, "model output and index dimensions differ");
  }
  const std::size_t n = queries.size();
  std::vector<UnitEmbedding> composed(n);
  std::vector<std::exception_ptr> failures(n);
  for (const auto& q : queries) validate_query(q, index);
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      std::optional<UnitEmbedding> ref;
      if (queries[i].reference_id) ref = index.embedding(*queries[i].reference_id);
      composed[i] = compose(params, ref, queries[i].text);
    } catch (...) {
      failures[i] = std::current_exception();
    }
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  return evaluate_composed(queries, composed, index, ks);
}

}  // namespace cir
