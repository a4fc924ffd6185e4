#include "cir/oracle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "cir/error.hpp"
#include "cir/random.hpp"
#include "cir/records.hpp"
#include "cir/synthesis.hpp"

namespace cir::oracle {

namespace {

using Clock = std::chrono::steady_clock;
using LD = long double;

constexpr std::size_t kMaxReportedFailures = 8;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), format, a, b, c);
  return buf;
}

void track_max(SuiteResult& r, const std::string& key, double value) {
  auto [it, inserted] = r.measures.emplace(key, value);
  if (!inserted) it->second = std::max(it->second, value);
}

UnitEmbedding random_unit(std::size_t dim, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(dim);
  for (double& x : v) x = g(rng);
  return normalize_span(std::span<const double>(v));
}

LD norm_ld(std::span<const float> v) {
  LD sq = 0.0L;
  for (float x : v) sq += static_cast<LD>(x) * static_cast<LD>(x);
  return std::sqrt(sq);
}

LD max_abs_diff(std::span<const float> a, std::span<const LD> b) {
  LD m = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<LD>(a[i]) - b[i]));
  return m;
}

template <typename T>
std::vector<LD> widen(std::span<const T> v) {
  return {v.begin(), v.end()};
}

// The instruction wrapper, written from the published template.
std::string instruction_reference(bool image, const std::string* text) {
  std::string s = "Instruct: Find the image that matches the query.\nQuery:\n";
  if (image) s += "Image: <image>\n";
  if (text != nullptr) s += "Text: " + *text + "\n";
  return s;
}

struct TemplateShape {
  const char* prefix;
  bool target_first;
  const char* middle;
  const char* suffix;
};

// The fifteen modification-text templates, encoded independently of the library.
constexpr TemplateShape kTemplateShapes[15] = {
    {"show ", true, " instead of ", ""},   {"", true, " instead of ", ""},
    {"show ", true, " rather than ", ""},  {"", true, " rather than ", ""},
    {"rather than ", false, ", show ", ""}, {"rather than ", false, ", ", ""},
    {"instead of ", false, ", ", ""},      {"", false, ", changed to ", ""},
    {"not ", false, ", but ", ""},         {"show ", true, ", not ", ""},
    {"", false, " is missing, ", ""},      {"", true, ", and ", " is missing"},
    {"remove ", false, ", add ", ""},      {"add ", true, ", remove ", ""},
    {"", false, " become ", ""},
};

std::string template_reference(const std::string& target, const std::string& neighbor, int id) {
  const auto& t = kTemplateShapes[id - 1];
  const std::string& first = t.target_first ? target : neighbor;
  const std::string& second = t.target_first ? neighbor : target;
  return std::string(t.prefix) + first + t.middle + second + t.suffix;
}

}  // namespace

void SuiteResult::fail(std::string what) {
  passed = false;
  if (failures.size() < kMaxReportedFailures) failures.push_back(std::move(what));
}

// ---- references ----------------------------------------------------------------

std::vector<LD> slerp_reference(std::span<const float> a, std::span<const float> b, LD alpha) {
  const LD theta = angle_reference(a, b);
  std::vector<LD> out(a.size());
  if (theta < 1e-12L) {
    LD sq = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i) {
      out[i] = alpha * a[i] + (1.0L - alpha) * b[i];
      sq += out[i] * out[i];
    }
    for (LD& x : out) x /= std::sqrt(sq);
    return out;
  }
  const LD s = std::sin(theta);
  const LD wa = std::sin(alpha * theta) / s;
  const LD wb = std::sin((1.0L - alpha) * theta) / s;
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = wa * a[i] + wb * b[i];
  return out;
}

LD angle_reference(std::span<const LD> u, std::span<const LD> v) {
  LD diff = 0.0L;
  LD sum = 0.0L;
  for (std::size_t i = 0; i < u.size(); ++i) {
    diff += (u[i] - v[i]) * (u[i] - v[i]);
    sum += (u[i] + v[i]) * (u[i] + v[i]);
  }
  return 2.0L * std::atan2(std::sqrt(diff), std::sqrt(sum));
}

LD angle_reference(std::span<const float> u, std::span<const float> v) {
  const auto a = widen(u);
  const auto b = widen(v);
  return angle_reference(std::span<const LD>(a), std::span<const LD>(b));
}

double cosine_reference(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return std::clamp(s, -1.0, 1.0);
}

std::vector<std::string> rank_reference(const std::vector<std::string>& ids, const EmbeddingMatrix& gallery,
                                        std::span<const float> query, const IdSet& exclude) {
  std::vector<std::pair<double, std::string>> pool;
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (!exclude.contains(ids[r])) pool.emplace_back(cosine_reference(gallery.row(r), query), ids[r]);
  }
  std::vector<std::string> out;
  while (!pool.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < pool.size(); ++i) {
      const bool higher = pool[i].first > pool[best].first;
      const bool tie_smaller_id = pool[i].first == pool[best].first && pool[i].second < pool[best].second;
      if (higher || tie_smaller_id) best = i;
    }
    out.push_back(pool[best].second);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return out;
}

double recall_reference(const std::vector<std::vector<std::string>>& rankings, const std::vector<IdSet>& gts,
                        std::size_t k) {
  std::size_t hits = 0;
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    bool hit = false;
    for (std::size_t i = 0; i < rankings[q].size() && i < k; ++i) hit = hit || gts[q].contains(rankings[q][i]);
    hits += hit ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(rankings.size());
}

double map_reference(const std::vector<std::vector<std::string>>& rankings, const std::vector<IdSet>& gts,
                     std::size_t k) {
  LD total = 0.0L;
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    const auto& ranking = rankings[q];
    LD ap = 0.0L;
    for (std::size_t pos = 1; pos <= std::min(k, ranking.size()); ++pos) {
      if (!gts[q].contains(ranking[pos - 1])) continue;
      std::size_t relevant_so_far = 0;
      for (std::size_t i = 0; i < pos; ++i) relevant_so_far += gts[q].contains(ranking[i]) ? 1 : 0;
      ap += static_cast<LD>(relevant_so_far) / static_cast<LD>(pos);
    }
    total += ap / static_cast<LD>(std::min(k, gts[q].size()));
  }
  return static_cast<double>(total / static_cast<LD>(rankings.size()));
}

std::vector<LD> text_features_reference(const std::string& text, std::size_t vocab_buckets) {
  std::vector<LD> counts(vocab_buckets, 0.0L);
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : token) {
      h ^= ch;
      h *= 1099511628211ULL;
    }
    counts[h % vocab_buckets] += 1.0L;
    token.clear();
  };
  for (unsigned char ch : text) {
    if (std::isspace(ch) || std::ispunct(ch)) {
      flush();
    } else {
      token.push_back(static_cast<char>(std::tolower(ch)));
    }
  }
  flush();
  LD sq = 0.0L;
  for (LD c : counts) sq += c * c;
  if (sq > 0.0L) {
    for (LD& c : counts) c /= std::sqrt(sq);
  }
  return counts;
}

std::vector<LD> compose_reference(const ComposerParams& p, const UnitEmbedding* reference, const std::string* text) {
  const auto& d = p.dims;
  std::vector<LD> x(d.fusion_input(), 0.0L);
  if (reference != nullptr) {
    for (std::size_t r = 0; r < d.hidden_dim; ++r) {
      LD acc = p.adapter.bias[r];
      for (std::size_t k = 0; k < d.image_dim; ++k) acc += static_cast<LD>(p.adapter.w(r, k)) * (*reference)[k];
      x[r] = acc;
    }
    x[d.image_flag()] = 1.0L;
  }
  if (text != nullptr) {
    const auto f = text_features_reference(instruction_reference(reference != nullptr, text), d.vocab_buckets);
    std::copy(f.begin(), f.end(), x.begin() + static_cast<std::ptrdiff_t>(d.hidden_dim));
    x[d.text_flag()] = 1.0L;
  }
  auto dense = [](const Dense& layer, const std::vector<LD>& in, bool activate) {
    std::vector<LD> out(layer.out);
    for (std::size_t r = 0; r < layer.out; ++r) {
      LD acc = layer.bias[r];
      for (std::size_t k = 0; k < layer.in; ++k) acc += static_cast<LD>(layer.w(r, k)) * in[k];
      out[r] = activate ? std::tanh(acc) : acc;
    }
    return out;
  };
  const auto h1 = dense(p.fusion_in, x, true);
  const auto h2 = dense(p.fusion_out, h1, true);
  auto out = dense(p.projection, h2, false);
  LD sq = 0.0L;
  for (LD v : out) sq += v * v;
  for (LD& v : out) v /= std::sqrt(sq);
  return out;
}

LD contrastive_reference(const std::vector<std::vector<LD>>& queries, const std::vector<std::vector<LD>>& targets,
                         LD tau) {
  const std::size_t n = queries.size();
  std::vector<std::vector<LD>> logit(n, std::vector<LD>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      LD s = 0.0L;
      for (std::size_t k = 0; k < queries[i].size(); ++k) s += queries[i][k] * targets[j][k];
      logit[i][j] = s / tau;
    }
  }
  LD rows = 0.0L;
  LD cols = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    LD zr = 0.0L;
    LD zc = 0.0L;
    for (std::size_t j = 0; j < n; ++j) {
      zr += std::exp(logit[i][j]);
      zc += std::exp(logit[j][i]);
    }
    rows += -std::log(std::exp(logit[i][i]) / zr);
    cols += -std::log(std::exp(logit[i][i]) / zc);
  }
  return 0.5L * (rows / n + cols / n);
}

LD loss_reference(const ComposerParams& p, std::span<const TrainingSample> batch, LossMode mode) {
  std::vector<std::vector<LD>> z;
  std::vector<std::vector<LD>> c_v;
  std::vector<std::vector<LD>> c_w;
  std::vector<std::vector<LD>> c;
  for (const auto& s : batch) {
    z.push_back(widen(s.target.values()));
    c.push_back(compose_reference(p, &s.reference, &s.modification_text));
    if (mode == LossMode::Pretrain) {
      c_v.push_back(compose_reference(p, &s.reference, nullptr));
      c_w.push_back(compose_reference(p, nullptr, &s.caption));
    }
  }
  const LD tau = p.tau;
  if (mode == LossMode::Triplet) return contrastive_reference(c, z, tau);
  return (contrastive_reference(c_v, z, tau) + contrastive_reference(c_w, z, tau) + contrastive_reference(c, z, tau)) /
         3.0L;
}

ComposerParams finite_difference_gradient(const ComposerParams& p, std::span<const TrainingSample> batch,
                                          LossMode mode, double step) {
  ComposerParams work = p;
  ComposerParams grad = ComposerParams::zeros(p.dims);
  auto work_tensors = work.tensors();
  auto grad_tensors = grad.tensors();
  for (std::size_t t = 0; t < work_tensors.size(); ++t) {
    for (std::size_t i = 0; i < work_tensors[t].size(); ++i) {
      double& x = work_tensors[t][i];
      const double saved = x;
      x = saved + step;
      const LD up = loss_reference(work, batch, mode);
      x = saved - step;
      const LD down = loss_reference(work, batch, mode);
      x = saved;
      grad_tensors[t][i] = static_cast<double>((up - down) / (2.0L * step));
    }
  }
  return grad;
}

std::vector<std::vector<std::string>> groups_reference(const EmbeddingTable& table, const PairingConfig& cfg) {
  const auto& items = table.items();
  std::vector<std::string> order;
  for (const auto& it : items) order.push_back(it.id);
  std::sort(order.begin(), order.end());
  std::set<std::string> used;
  std::vector<std::vector<std::string>> groups;
  for (const auto& seed_id : order) {
    if (used.contains(seed_id)) continue;
    const auto seed_row = table.matrix().row(table.at(seed_id));
    std::vector<std::string> remaining;
    for (const auto& id : order) {
      if (id != seed_id && !used.contains(id)) remaining.push_back(id);
    }
    std::vector<std::string> members{seed_id};
    std::vector<double> accepted;
    // Repeatedly take the most similar unvisited candidate.
    while (!remaining.empty() && members.size() < cfg.group_size) {
      std::size_t best = 0;
      double best_sim = -2.0;
      for (std::size_t i = 0; i < remaining.size(); ++i) {
        const double s = cosine_reference(table.matrix().row(table.at(remaining[i])), seed_row);
        if (s > best_sim) {
          best = i;
          best_sim = s;
        }
      }
      const std::string id = remaining[best];
      remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
      if (best_sim < cfg.low || best_sim > cfg.high) continue;
      bool spaced = true;
      for (double a : accepted) spaced = spaced && std::abs(best_sim - a) >= cfg.interval;
      if (!spaced) continue;
      members.push_back(id);
      accepted.push_back(best_sim);
    }
    if (members.size() < cfg.group_size) continue;
    used.insert(members.begin(), members.end());
    groups.push_back(members);
  }
  return groups;
}

std::set<std::pair<std::string, std::string>> group_pairs_reference(const std::vector<std::string>& m) {
  std::set<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i + 1 < m.size(); ++i) out.emplace(m[i], m[i + 1]);
  for (std::size_t i = 1; i < m.size(); ++i) out.emplace(m[0], m[i]);
  return out;
}

// ---- suites --------------------------------------------------------------------

SuiteResult slerp_suite(std::uint64_t seed, std::size_t cases) {
  constexpr double kNormTol = 1e-6;
  constexpr double kAngleTol = 1e-5;
  constexpr double kReferenceTol = 1e-6;
  SuiteResult r;
  r.name = "slerp";
  const auto t0 = Clock::now();
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick_dim(2, 64);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto check = [&](const UnitEmbedding& a, const UnitEmbedding& b, double alpha, const std::string& tag) {
    const auto out = slerp(a, b, alpha);
    const double norm_err = static_cast<double>(std::abs(norm_ld(out.values()) - 1.0L));
    const LD theta = angle_reference(a.values(), b.values());
    const double angle_err =
        static_cast<double>(std::abs(angle_reference(out.values(), a.values()) - (1.0L - alpha) * theta));
    const auto ref = slerp_reference(a.values(), b.values(), alpha);
    const double ref_err = static_cast<double>(max_abs_diff(out.values(), ref));
    track_max(r, "max_norm_error", norm_err);
    track_max(r, "max_angle_error", angle_err);
    track_max(r, "max_reference_error", ref_err);
    if (norm_err > kNormTol) r.fail(tag + fmt(": norm error %.3g", norm_err));
    if (angle_err > kAngleTol) r.fail(tag + fmt(": angle law error %.3g (theta %.6g, alpha %.3f)", angle_err,
                                               static_cast<double>(theta), alpha));
    if (ref_err > kReferenceTol) r.fail(tag + fmt(": deviates from reference by %.3g", ref_err));
    ++r.cases;
  };

  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t dim = pick_dim(rng);
    const auto a = random_unit(dim, rng);
    UnitEmbedding b = random_unit(dim, rng);
    if (c % 10 == 9) {
      // Near-parallel pair with a log-uniform tiny separation.
      const double eps = std::pow(10.0, -9.0 + 7.0 * unit(rng));
      std::vector<double> v(dim);
      for (std::size_t i = 0; i < dim; ++i) v[i] = a[i] + eps * b[i];
      b = normalize_span(std::span<const double>(v));
    }
    const double alpha = unit(rng);
    const std::string tag = "case " + std::to_string(c);
    check(a, b, alpha, tag);
    if (slerp(a, b, 1.0) != a) r.fail(tag + ": alpha=1 does not return a");
    if (slerp(a, b, 0.0) != b) r.fail(tag + ": alpha=0 does not return b");
    if (slerp(a, a, alpha) != a) r.fail(tag + ": slerp(a, a) != a");
  }

  // Continuity across the lerp fallback: sweep the separation through the threshold.
  const double sweep[] = {1e-2, 1e-3, 1e-4, 1e-5, 3e-6, 1.5e-6, 1.01e-6, 0.99e-6, 7e-7, 3e-7, 1e-7, 1e-8};
  for (int rep = 0; rep < 8; ++rep) {
    const std::size_t dim = pick_dim(rng);
    const auto a = random_unit(dim, rng);
    const auto dir = random_unit(dim, rng);
    for (double theta : sweep) {
      // b = cos(theta) a + sin(theta) u with u the part of dir orthogonal to a.
      LD along = 0.0L;
      for (std::size_t i = 0; i < dim; ++i) along += static_cast<LD>(a[i]) * dir[i];
      std::vector<LD> u(dim);
      LD usq = 0.0L;
      for (std::size_t i = 0; i < dim; ++i) {
        u[i] = dir[i] - along * a[i];
        usq += u[i] * u[i];
      }
      std::vector<double> v(dim);
      for (std::size_t i = 0; i < dim; ++i) {
        v[i] = static_cast<double>(std::cos(static_cast<LD>(theta)) * a[i] +
                                   std::sin(static_cast<LD>(theta)) * u[i] / std::sqrt(usq));
      }
      const auto b = normalize_span(std::span<const double>(v));
      for (double alpha : {0.1, 0.5, 0.9}) check(a, b, alpha, fmt("sweep theta %.3g alpha %.1f", theta, alpha));
    }
  }
  r.seconds = seconds_since(t0);
  r.measures["seconds"] = r.seconds;
  if (r.seconds >= 1.0) r.fail(fmt("took %.3f s (limit 1 s)", r.seconds));
  return r;
}

SuiteResult metrics_suite(std::uint64_t seed, std::size_t galleries) {
  SuiteResult r;
  r.name = "metrics";
  const auto t0 = Clock::now();
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick_n(1, 64);
  std::uniform_int_distribution<std::size_t> pick_dim(2, 8);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> letter('a', 'z');

  {
    const Ranking ranking{"a", "x", "b", "y"};
    const IdSet gt{"a", "b"};
    const double ap = average_precision_at_k(ranking, gt, 4);
    r.measures["hand_ap"] = ap;
    if (ap != 5.0 / 6.0) r.fail(fmt("hand case AP %.17g != 5/6", ap));
    ++r.cases;
  }

  for (std::size_t g = 0; g < galleries; ++g) {
    const std::size_t n = pick_n(rng);
    const std::size_t dim = pick_dim(rng);
    std::set<std::string> id_set;
    while (id_set.size() < n) {
      std::string id = "g";
      for (int i = 0; i < 3; ++i) id.push_back(static_cast<char>(letter(rng)));
      id_set.insert(id);
    }
    std::vector<std::string> ids(id_set.begin(), id_set.end());
    std::shuffle(ids.begin(), ids.end(), rng);
    EmbeddingMatrix m;
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0 && unit(rng) < 0.25) {
        // Duplicate an earlier row to force exact ties.
        const auto src = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
        const auto row = m.row(src);
        m.append(std::vector<float>(row.begin(), row.end()));
      } else {
        m.append(random_unit(dim, rng).values());
      }
    }
    const RetrievalIndex index(ids, m);

    const std::size_t n_queries = 1 + g % 5;
    std::vector<Ranking> rankings;
    std::vector<IdSet> gts;
    for (std::size_t q = 0; q < n_queries; ++q) {
      const UnitEmbedding query =
          unit(rng) < 0.3 ? m.unit_row(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)) : random_unit(dim, rng);
      IdSet exclude;
      for (const auto& id : ids) {
        if (unit(rng) < 0.1) exclude.insert(id);
      }
      auto got = rank(index, query, exclude);
      const auto want = rank_reference(ids, m, query.values(), exclude);
      if (got != want) r.fail("gallery " + std::to_string(g) + ": rank differs from reference");

      std::vector<std::string> subset;
      for (const auto& id : ids) {
        if (unit(rng) < 0.4) subset.push_back(id);
      }
      std::vector<std::string> subset_ids;
      IdSet subset_exclude = exclude;
      for (const auto& id : ids) {
        if (std::find(subset.begin(), subset.end(), id) == subset.end()) subset_exclude.insert(id);
      }
      if (rank_within(index, query, subset, exclude) != rank_reference(ids, m, query.values(), subset_exclude)) {
        r.fail("gallery " + std::to_string(g) + ": rank_within differs from reference");
      }

      IdSet gt;
      const std::size_t gt_size = std::min<std::size_t>(n, 1 + q % 3);
      while (gt.size() < gt_size) gt.insert(ids[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]);
      rankings.push_back(std::move(got));
      gts.push_back(std::move(gt));
      ++r.cases;
    }
    const std::size_t random_k = std::uniform_int_distribution<std::size_t>(1, 70)(rng);
    for (std::size_t k : {std::size_t{1}, std::size_t{2}, std::size_t{5}, std::size_t{10}, std::size_t{50}, random_k}) {
      const double rec = recall_at_k(rankings, gts, k);
      const double rec_ref = recall_reference(rankings, gts, k);
      const double map = map_at_k(rankings, gts, k);
      const double map_ref = map_reference(rankings, gts, k);
      if (rec != rec_ref) r.fail(fmt("recall@%g %.17g != reference %.17g", static_cast<double>(k), rec, rec_ref));
      if (map != map_ref) r.fail(fmt("mAP@%g %.17g != reference %.17g", static_cast<double>(k), map, map_ref));
    }
  }
  r.seconds = seconds_since(t0);
  r.measures["seconds"] = r.seconds;
  r.measures["galleries"] = static_cast<double>(galleries);
  return r;
}

SuiteResult gradient_suite(std::uint64_t seed, const GradientCheckConfig& cfg) {
  SuiteResult r;
  r.name = "gradient";
  const auto t0 = Clock::now();
  Rng rng(seed);
  static const std::vector<std::string> kWords = {"red",  "blue", "car",   "dog",    "add",   "remove", "hat",
                                                  "tree", "two",  "small", "bright", "under", "left",   "a"};
  auto phrase = [&](std::size_t words) {
    std::string s;
    for (std::size_t i = 0; i < words; ++i) {
      if (i > 0) s += ' ';
      s += kWords[std::uniform_int_distribution<std::size_t>(0, kWords.size() - 1)(rng)];
    }
    return s;
  };
  std::uniform_real_distribution<double> bias(-0.5, 0.5);
  std::uniform_real_distribution<double> tau_dist(0.05, 1.0);

  for (std::size_t c = 0; c < cfg.configs; ++c) {
    ComposerDims dims;
    dims.image_dim = 3 + c % 3;
    dims.hidden_dim = 4 + c % 5;
    dims.vocab_buckets = 16;
    dims.output_dim = dims.image_dim;
    if (c == 0) {
      dims.image_dim = 4;
      dims.hidden_dim = 8;
      dims.output_dim = 4;
    }
    const std::size_t batch_size = 2 + c % 3;
    auto params = ComposerParams::initialize(dims, tau_dist(rng), mix_seed(seed, c));
    for (auto* layer : {&params.adapter, &params.fusion_in, &params.fusion_out, &params.projection}) {
      for (double& b : layer->bias) b = bias(rng);
    }
    std::vector<TrainingSample> batch;
    for (std::size_t i = 0; i < batch_size; ++i) {
      batch.push_back({random_unit(dims.image_dim, rng), phrase(1 + i % 4), phrase(2 + i % 3),
                       random_unit(dims.output_dim, rng)});
    }
    for (LossMode mode : {LossMode::Pretrain, LossMode::Triplet}) {
      const std::string tag =
          "config " + std::to_string(c) + (mode == LossMode::Pretrain ? " pretrain" : " triplet");
      const auto analytic = loss_gradients(params, batch, mode);
      const auto numeric = finite_difference_gradient(params, batch, mode, cfg.step);
      const double ref_loss = static_cast<double>(loss_reference(params, batch, mode));
      const double loss_err = std::abs(analytic.loss - ref_loss) / std::max(1.0, std::abs(ref_loss));
      track_max(r, "max_loss_error", loss_err);
      if (loss_err > 1e-12) r.fail(tag + fmt(": loss %.17g vs reference %.17g", analytic.loss, ref_loss));

      const auto a = analytic.grad.tensors();
      const auto n = numeric.tensors();
      double worst = 0.0;
      for (std::size_t t = 0; t < a.size(); ++t) {
        for (std::size_t i = 0; i < a[t].size(); ++i) {
          const double denom = std::max({std::abs(a[t][i]), std::abs(n[t][i]), cfg.floor});
          const double rel = std::abs(a[t][i] - n[t][i]) / denom;
          worst = std::max(worst, rel);
          if (t + 1 == a.size()) track_max(r, "max_tau_relative_error", rel);
        }
      }
      track_max(r, "max_relative_error", worst);
      if (worst >= cfg.tolerance) r.fail(tag + fmt(": max relative error %.3g", worst));
      ++r.cases;
    }
  }
  r.seconds = seconds_since(t0);
  r.measures["seconds"] = r.seconds;
  if (r.seconds >= 30.0) r.fail(fmt("took %.1f s (limit 30 s)", r.seconds));
  return r;
}

SuiteResult synthesis_suite(std::uint64_t seed, std::size_t samples) {
  SuiteResult r;
  r.name = "synthesis";
  const auto t0 = Clock::now();
  Rng data_rng(mix_seed(seed, 1));
  constexpr std::size_t kBatch = 16;
  std::vector<CaptionedItem> items;
  for (std::size_t i = 0; i < kBatch; ++i) {
    items.push_back({"item" + std::to_string(i), "caption number " + std::to_string(i), random_unit(16, data_rng)});
  }

  auto run = [&](double ratio, std::size_t count) {
    SynthConfig cfg;
    cfg.text_synthesis_ratio = ratio;
    Rng rng(mix_seed(seed, 2));
    std::vector<SynthesizedTriplet> all;
    while (all.size() < count) {
      auto batch = synthesize_batch(items, cfg, rng);
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& t = batch[i];
        if (t.target_id != items[i].id) r.fail("triplet " + std::to_string(all.size()) + " has the wrong target");
        if (t.neighbor_id == t.target_id) r.fail("neighbor equals target for " + t.target_id);
        if (t.template_id.has_value() != t.text_was_synthesized) r.fail("template presence mismatch");
        // Nearest neighbour over the augmented batch, smallest index on ties.
        std::size_t best = i == 0 ? 1 : 0;
        for (std::size_t j = 0; j < batch.size(); ++j) {
          if (j == i) continue;
          const double sj = cosine_reference(t.augmented_target.values(), batch[j].augmented_target.values());
          const double sb = cosine_reference(t.augmented_target.values(), batch[best].augmented_target.values());
          if (sj > sb) best = j;
        }
        if (t.neighbor_id != items[best].id) r.fail("neighbor of " + t.target_id + " is not the nearest");
        const auto ref = slerp_reference(t.augmented_target.values(), t.augmented_neighbor.values(), cfg.alpha);
        const double err = static_cast<double>(max_abs_diff(t.reference_embedding.values(), ref));
        track_max(r, "max_reference_error", err);
        if (err > 1e-6) r.fail("reference embedding of " + t.target_id + fmt(" off by %.3g", err));
        const std::string& neighbor_caption = items[best].caption;
        if (t.text_was_synthesized) {
          const int id = *t.template_id;
          if (id < 1 || id > 15) {
            r.fail("template id out of range");
          } else if (t.modification_text != template_reference(items[i].caption, neighbor_caption, id)) {
            r.fail("text for template " + std::to_string(id) + " is '" + t.modification_text + "'");
          }
        } else if (t.modification_text != items[i].caption) {
          r.fail("unsynthesized text differs from the caption");
        }
        all.push_back(t);
      }
    }
    return all;
  };

  const auto main_run = run(0.75, samples);
  const auto synthesized = static_cast<double>(
      std::count_if(main_run.begin(), main_run.end(), [](const auto& t) { return t.text_was_synthesized; }));
  const double fraction = synthesized / static_cast<double>(main_run.size());
  r.measures["fraction_at_0.75"] = fraction;
  r.measures["samples"] = static_cast<double>(main_run.size());
  if (fraction < 0.73 || fraction > 0.77) r.fail(fmt("synthesized fraction %.4f outside [0.73, 0.77]", fraction));

  for (double ratio : {0.0, 1.0}) {
    const auto boundary = run(ratio, 1000);
    const bool all_match = std::all_of(boundary.begin(), boundary.end(),
                                       [&](const auto& t) { return t.text_was_synthesized == (ratio == 1.0); });
    if (!all_match) r.fail(fmt("ratio %.0f does not give the exact boundary behavior", ratio));
  }
  r.cases = main_run.size() + 2000;
  r.seconds = seconds_since(t0);
  r.measures["seconds"] = r.seconds;
  return r;
}

SuiteResult pairing_suite(std::uint64_t seed, std::size_t corpora) {
  SuiteResult r;
  r.name = "pairing";
  const auto t0 = Clock::now();
  const PairingConfig cfg;
  Rng rng(seed);
  std::uniform_real_distribution<double> spread_dist(0.3, 1.2);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::size_t total_groups = 0;
  double min_sim = 1.0;
  double max_sim = 0.0;
  double min_gap = 1.0;

  for (std::size_t c = 0; c < corpora; ++c) {
    const std::size_t dim = 8;
    const std::size_t n = 60 + (c % 4) * 20;
    std::vector<ItemRecord> records;
    EmbeddingMatrix m;
    std::vector<UnitEmbedding> centers;
    for (int k = 0; k < 4; ++k) centers.push_back(random_unit(dim, rng));
    std::set<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& center = centers[i % centers.size()];
      const double spread = spread_dist(rng);
      std::vector<double> v(dim);
      for (std::size_t k = 0; k < dim; ++k) v[k] = center[k] + spread * gauss(rng) / std::sqrt(double(dim));
      m.append(normalize_span(std::span<const double>(v)).values());
      std::string id;
      do {
        id = "img" + std::to_string(std::uniform_int_distribution<int>(0, 99999)(rng));
      } while (!ids.insert(id).second);
      records.push_back({id, "caption " + id, ""});
    }
    const EmbeddingTable table(records, m);
    const auto groups = build_groups(table, cfg);
    const auto expected = groups_reference(table, cfg);
    if (groups.size() != expected.size()) r.fail("corpus " + std::to_string(c) + ": group count differs");
    std::set<std::string> seen;
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
      const auto& g = groups[gi];
      const std::string tag = "corpus " + std::to_string(c) + " group " + std::to_string(gi);
      if (gi < expected.size() && g.member_ids != expected[gi]) r.fail(tag + ": members differ from simulation");
      if (g.member_ids.size() != 6) r.fail(tag + ": size " + std::to_string(g.member_ids.size()));
      const auto seed_row = table.matrix().row(table.at(g.member_ids.front()));
      std::vector<double> sims;
      for (std::size_t k = 1; k < g.member_ids.size(); ++k) {
        const double s = cosine_reference(table.matrix().row(table.at(g.member_ids[k])), seed_row);
        sims.push_back(s);
        min_sim = std::min(min_sim, s);
        max_sim = std::max(max_sim, s);
        if (s < cfg.low || s > cfg.high) r.fail(tag + fmt(": similarity %.4f outside bounds", s));
      }
      for (std::size_t a = 0; a < sims.size(); ++a) {
        for (std::size_t b = a + 1; b < sims.size(); ++b) {
          const double gap = std::abs(sims[a] - sims[b]);
          min_gap = std::min(min_gap, gap);
          if (gap < cfg.interval) r.fail(tag + fmt(": spacing %.4f below interval", gap));
        }
      }
      for (const auto& id : g.member_ids) {
        if (!seen.insert(id).second) r.fail(tag + ": " + id + " used twice");
      }
      const auto pairs = pairs_from_group(g);
      const std::set<std::pair<std::string, std::string>> unique(pairs.begin(), pairs.end());
      if (pairs.size() != 9 || unique.size() != 9) r.fail(tag + ": expected 9 unique pairs");
      if (unique != group_pairs_reference(g.member_ids)) r.fail(tag + ": pairs differ from enumeration");
      ++r.cases;
    }
    total_groups += groups.size();
  }
  r.measures["groups"] = static_cast<double>(total_groups);
  r.measures["min_similarity"] = min_sim;
  r.measures["max_similarity"] = max_sim;
  r.measures["min_spacing"] = min_gap;
  if (total_groups == 0) r.fail("no groups formed; the suite would be vacuous");
  r.seconds = seconds_since(t0);
  r.measures["seconds"] = r.seconds;
  return r;
}

RefineScenario refine_scenario() {
  using B = MockJudge::Behavior;
  constexpr B C = B::Correct;
  constexpr B W = B::Wrong;
  constexpr B R = B::Refuse;
  constexpr B M = B::MinusOne;
  Rng rng(mix_seed(2024, 7));
  std::vector<std::string> ids;
  EmbeddingMatrix m;
  for (int i = 0; i < 24; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "img%02d", i);
    ids.push_back(buf);
    m.append(random_unit(8, rng).values());
  }
  RefineScenario s{RetrievalIndex(ids, m), {}, MockJudge{}, {}, {}};
  auto add = [&](int ref, int tgt, const std::string& text, RefinementState state, int level) {
    s.triplets.push_back({ids[ref], ids[tgt], text});
    s.expected_state.push_back(state);
    s.expected_level.push_back(level);
  };
  auto gen = [&](std::size_t t, std::vector<std::string> texts) {
    s.judge.script_generation(s.triplets[t].ref_id, s.triplets[t].target_id, std::move(texts));
  };
  auto val = [&](std::size_t t, const std::string& text, std::vector<B> rounds) {
    s.judge.script_validation(s.triplets[t].ref_id, text, std::move(rounds));
  };

  add(0, 1, "make the car red", RefinementState::Good, 0);              // unscripted: correct x3
  add(2, 3, "add a second dog", RefinementState::Good, 0);              // 2 of 3
  add(4, 5, "change the sky", RefinementState::Regenerated, 1);         // fails, level 1 passes
  add(6, 7, "make it different", RefinementState::Regenerated, 2);      // partial refusal is a plain fail
  add(8, 9, "other angle", RefinementState::Regenerated, 3);            // -1 answers
  add(10, 11, "something else", RefinementState::RemovedAmbiguous, 0);  // nothing passes
  add(12, 13, "show the person", RefinementState::RemovedHarmful, 0);   // every round refused
  add(14, 15, "remove the lamp", RefinementState::Good, 0);             // one refusal, still passes

  val(1, "add a second dog", {C, W, C});
  val(2, "change the sky", {W, W, W});
  gen(2, {"sky is cloudy", "sky is cloudy and grey", "sky is cloudy and grey with rain"});
  val(3, "make it different", {W, R, W});
  gen(3, {"bus is blue", "bus is blue and longer", "bus is blue and longer with open doors"});
  val(3, "bus is blue", {W, W, C});
  val(4, "other angle", {M, M, M});
  gen(4, {"seen from above", "seen from above at night", "seen from above at night near water"});
  val(4, "seen from above", {W, M, W});
  val(4, "seen from above at night", {M});
  val(4, "seen from above at night near water", {C, C, W});
  val(5, "something else", {W});
  gen(5, {"vase", "vase on table", "vase on table by window"});
  val(5, "vase", {W});
  val(5, "vase on table", {M, W, M});
  val(5, "vase on table by window", {C, W, W});
  val(6, "show the person", {R});
  val(7, "remove the lamp", {R, C, C});
  s.judge.register_targets(s.triplets);
  return s;
}

SuiteResult refine_suite(std::uint64_t seed) {
  SuiteResult r;
  r.name = "refine";
  const auto t0 = Clock::now();
  auto dump = [](const RefineResult& res) {
    std::ostringstream os;
    for (const auto& rec : res.records) os << to_json(rec).dump() << '\n';
    os << to_json(res.stats).dump() << '\n';
    return os.str();
  };
  std::vector<std::string> outputs;
  for (std::size_t concurrency : {std::size_t{4}, std::size_t{4}, std::size_t{1}}) {
    auto s = refine_scenario();
    RefineConfig cfg;
    cfg.seed = seed;
    cfg.concurrency = concurrency;
    const auto res = refine(s.triplets, s.index, s.judge, cfg);
    for (std::size_t i = 0; i < s.triplets.size(); ++i) {
      const auto& rec = res.records[i];
      const std::string tag = "triplet " + std::to_string(i);
      if (rec.state != s.expected_state[i]) {
        r.fail(tag + ": state " + std::string(to_string(rec.state)) + ", expected " +
               std::string(to_string(s.expected_state[i])));
      }
      if (rec.level != s.expected_level[i]) r.fail(tag + ": level " + std::to_string(rec.level));
      if (rec.round_log.size() % 3 != 0) r.fail(tag + ": round log not a multiple of 3");
      if (rec.state == RefinementState::Good && !(rec.triplet == s.triplets[i])) r.fail(tag + ": Good triplet changed");
      ++r.cases;
    }
    if (res.stats.total() != s.triplets.size()) r.fail("stats do not partition the input");
    const double n = static_cast<double>(s.triplets.size());
    const double fractions = static_cast<double>(res.stats.good) / n + static_cast<double>(res.stats.regenerated[0]) / n +
                             static_cast<double>(res.stats.regenerated[1]) / n +
                             static_cast<double>(res.stats.regenerated[2]) / n +
                             static_cast<double>(res.stats.removed_ambiguous) / n +
                             static_cast<double>(res.stats.removed_harmful) / n;
    r.measures["fraction_sum"] = fractions;
    if (fractions != 1.0) r.fail(fmt("stat fractions sum to %.17g", fractions));
    outputs.push_back(dump(res));
  }
  if (outputs[0] != outputs[1]) r.fail("rerun with the same seed is not bit-identical");
  if (outputs[0] != outputs[2]) r.fail("sequential and concurrent runs differ");
  r.seconds = seconds_since(t0);
  r.measures["seconds"] = r.seconds;
  return r;
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"slerp", "metrics", "gradient", "synthesis", "pairing", "refine"};
  return names;
}

SuiteResult run_suite(const std::string& name, std::uint64_t seed) {
  if (name == "slerp") return slerp_suite(seed);
  if (name == "metrics") return metrics_suite(seed);
  if (name == "gradient") return gradient_suite(seed);
  if (name == "synthesis") return synthesis_suite(seed);
  if (name == "pairing") return pairing_suite(seed);
  if (name == "refine") return refine_suite(seed);
  throw Error(ErrorKind::InvalidArgument, "unknown oracle suite '" + name + "'");
}

}  // namespace cir::oracle
