#include "cir/composer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>

#include "cir/error.hpp"
#include "cir/random.hpp"

namespace cir {

namespace {

void init_uniform(Dense& layer, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& w : layer.weight) w = dist(rng);
  std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
}

// Cached activations of one forward pass.
struct Forward {
  const UnitEmbedding* reference = nullptr;
  SparseFeatures text;
  bool has_text = false;
  std::vector<double> adapted;  // hidden
  std::vector<double> h1;       // hidden
  std::vector<double> h2;       // hidden
  std::vector<double> c;        // output, unit
  double p_norm = 0.0;
};

Forward run_forward(const ComposerParams& params, const TextFeaturizer& featurizer, const UnitEmbedding* reference,
                    const std::string* text) {
  const auto& d = params.dims;
  if (reference == nullptr && text == nullptr) throw Error(ErrorKind::EmptyQuery, "query has neither image nor text");
  Forward f;
  f.reference = reference;
  f.has_text = text != nullptr;
  f.adapted.assign(d.hidden_dim, 0.0);
  if (reference != nullptr) {
    if (reference->dim() != d.image_dim) {
      throw Error(ErrorKind::DimMismatch, "reference embedding does not match the adapter input");
    }
    for (std::size_t r = 0; r < d.hidden_dim; ++r) {
      double acc = params.adapter.bias[r];
      for (std::size_t k = 0; k < d.image_dim; ++k) acc += params.adapter.w(r, k) * (*reference)[k];
      f.adapted[r] = acc;
    }
  }
  if (text != nullptr) f.text = featurizer.sparse(assemble_instruction(reference != nullptr, *text));

  f.h1.resize(d.hidden_dim);
  const Dense& l1 = params.fusion_in;
  const double img_flag = reference != nullptr ? 1.0 : 0.0;
  const double txt_flag = text != nullptr ? 1.0 : 0.0;
  for (std::size_t r = 0; r < d.hidden_dim; ++r) {
    double acc = l1.bias[r];
    for (std::size_t k = 0; k < d.hidden_dim; ++k) acc += l1.w(r, k) * f.adapted[k];
    for (const auto& [b, v] : f.text.entries) acc += l1.w(r, d.hidden_dim + b) * v;
    acc += l1.w(r, d.image_flag()) * img_flag + l1.w(r, d.text_flag()) * txt_flag;
    f.h1[r] = std::tanh(acc);
  }

  f.h2.resize(d.hidden_dim);
  const Dense& l2 = params.fusion_out;
  for (std::size_t r = 0; r < d.hidden_dim; ++r) {
    double acc = l2.bias[r];
    for (std::size_t k = 0; k < d.hidden_dim; ++k) acc += l2.w(r, k) * f.h1[k];
    f.h2[r] = std::tanh(acc);
  }

  std::vector<double> p(d.output_dim);
  const Dense& proj = params.projection;
  double sq = 0.0;
  for (std::size_t r = 0; r < d.output_dim; ++r) {
    double acc = proj.bias[r];
    for (std::size_t k = 0; k < d.hidden_dim; ++k) acc += proj.w(r, k) * f.h2[k];
    p[r] = acc;
    sq += acc * acc;
  }
  f.p_norm = std::sqrt(sq);
  if (!(f.p_norm > kZeroNormEpsilon)) throw Error(ErrorKind::ZeroVector, "composed projection vanished");
  f.c.resize(d.output_dim);
  for (std::size_t r = 0; r < d.output_dim; ++r) f.c[r] = p[r] / f.p_norm;
  return f;
}

// Accumulates d loss / d params for one sample given d loss / d c.
void run_backward(const ComposerParams& params, const Forward& f, std::span<const double> dc, double scale,
                  ComposerParams& grad) {
  const auto& d = params.dims;
  double c_dot = 0.0;
  for (std::size_t r = 0; r < d.output_dim; ++r) c_dot += f.c[r] * dc[r];
  std::vector<double> dp(d.output_dim);
  for (std::size_t r = 0; r < d.output_dim; ++r) dp[r] = scale * (dc[r] - f.c[r] * c_dot) / f.p_norm;

  std::vector<double> dh2(d.hidden_dim, 0.0);
  for (std::size_t r = 0; r < d.output_dim; ++r) {
    grad.projection.bias[r] += dp[r];
    for (std::size_t k = 0; k < d.hidden_dim; ++k) {
      grad.projection.w(r, k) += dp[r] * f.h2[k];
      dh2[k] += params.projection.w(r, k) * dp[r];
    }
  }

  std::vector<double> dh1(d.hidden_dim, 0.0);
  for (std::size_t r = 0; r < d.hidden_dim; ++r) {
    const double du = dh2[r] * (1.0 - f.h2[r] * f.h2[r]);
    grad.fusion_out.bias[r] += du;
    for (std::size_t k = 0; k < d.hidden_dim; ++k) {
      grad.fusion_out.w(r, k) += du * f.h1[k];
      dh1[k] += params.fusion_out.w(r, k) * du;
    }
  }

  const bool has_image = f.reference != nullptr;
  std::vector<double> d_adapted(d.hidden_dim, 0.0);
  for (std::size_t r = 0; r < d.hidden_dim; ++r) {
    const double du = dh1[r] * (1.0 - f.h1[r] * f.h1[r]);
    grad.fusion_in.bias[r] += du;
    if (has_image) {
      for (std::size_t k = 0; k < d.hidden_dim; ++k) {
        grad.fusion_in.w(r, k) += du * f.adapted[k];
        d_adapted[k] += params.fusion_in.w(r, k) * du;
      }
      grad.fusion_in.w(r, d.image_flag()) += du;
    }
    for (const auto& [b, v] : f.text.entries) grad.fusion_in.w(r, d.hidden_dim + b) += du * v;
    if (f.has_text) grad.fusion_in.w(r, d.text_flag()) += du;
  }

  if (has_image) {
    for (std::size_t r = 0; r < d.hidden_dim; ++r) {
      grad.adapter.bias[r] += d_adapted[r];
      for (std::size_t k = 0; k < d.image_dim; ++k) grad.adapter.w(r, k) += d_adapted[r] * (*f.reference)[k];
    }
  }
}

void check_unit_rows(const RealMatrix& m, const char* what) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    double sq = 0.0;
    for (double x : m.row(i)) sq += x * x;
    if (std::abs(std::sqrt(sq) - 1.0) > UnitEmbedding::kUnitTolerance) {
      throw Error(ErrorKind::InvalidArgument, std::string(what) + " row " + std::to_string(i) + " is not unit length");
    }
  }
}

double log_sum_exp(std::span<const double> xs) {
  const double m = *std::max_element(xs.begin(), xs.end());
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - m);
  return m + std::log(acc);
}

ContrastiveGrad contrastive_impl(const RealMatrix& q, const RealMatrix& z, double tau, bool want_grad) {
  if (q.rows < 2) throw Error(ErrorKind::BatchTooSmall, "contrastive loss needs at least two rows");
  if (q.rows != z.rows || q.cols != z.cols) throw Error(ErrorKind::DimMismatch, "queries and targets differ in shape");
  if (!(tau > 0.0)) throw Error(ErrorKind::InvalidArgument, "tau must be positive");
  check_unit_rows(q, "query");
  check_unit_rows(z, "target");
  const std::size_t n = q.rows;
  const double nb = static_cast<double>(n);

  RealMatrix sims(n, n);
  RealMatrix logits(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < q.cols; ++k) s += q.row(i)[k] * z.row(j)[k];
      sims.row(i)[j] = s;
      logits.row(i)[j] = s / tau;
    }
  }

  // Row-wise softmax (query -> targets) and column-wise (target -> queries).
  RealMatrix row_prob(n, n);
  RealMatrix col_prob(n, n);
  double row_loss = 0.0;
  double col_loss = 0.0;
  std::vector<double> column(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double lse = log_sum_exp(logits.row(i));
    row_loss += lse - logits.row(i)[i];
    for (std::size_t j = 0; j < n; ++j) row_prob.row(i)[j] = std::exp(logits.row(i)[j] - lse);
  }
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) column[i] = logits.row(i)[j];
    const double lse = log_sum_exp(column);
    col_loss += lse - logits.row(j)[j];
    for (std::size_t i = 0; i < n; ++i) col_prob.row(i)[j] = std::exp(column[i] - lse);
  }

  ContrastiveGrad out;
  out.loss = 0.5 * (row_loss + col_loss) / nb;
  if (!want_grad) return out;

  // d loss / d logit_ij = (P_ij + Pc_ij - 2 delta_ij) / (2n)
  out.d_queries = RealMatrix(n, q.cols);
  double d_tau = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double g_logit = (row_prob.row(i)[j] + col_prob.row(i)[j] - (i == j ? 2.0 : 0.0)) / (2.0 * nb);
      d_tau -= g_logit * sims.row(i)[j] / (tau * tau);
      const double g_sim = g_logit / tau;
      for (std::size_t k = 0; k < q.cols; ++k) out.d_queries.row(i)[k] += g_sim * z.row(j)[k];
    }
  }
  out.d_tau = d_tau;
  return out;
}

enum class QueryKind { ImageOnly, TextOnly, Composed };

LossGradients evaluate_batch(const ComposerParams& params, std::span<const TrainingSample> batch, LossMode mode,
                             bool want_grad) {
  if (batch.size() < 2) throw Error(ErrorKind::BatchTooSmall, "loss needs at least two samples");
  const auto& d = params.dims;
  const std::size_t n = batch.size();
  const TextFeaturizer featurizer(d.vocab_buckets);

  RealMatrix targets(n, d.output_dim);
  for (std::size_t i = 0; i < n; ++i) {
    if (batch[i].target.dim() != d.output_dim) {
      throw Error(ErrorKind::DimMismatch, "target embedding does not match the projection output");
    }
    for (std::size_t k = 0; k < d.output_dim; ++k) targets.row(i)[k] = batch[i].target[k];
  }

  std::vector<QueryKind> kinds;
  if (mode == LossMode::Pretrain) {
    kinds = {QueryKind::ImageOnly, QueryKind::TextOnly, QueryKind::Composed};
  } else {
    kinds = {QueryKind::Composed};
  }
  const double weight = 1.0 / static_cast<double>(kinds.size());

  LossGradients out;
  if (want_grad) out.grad = ComposerParams::zeros(d);
  for (QueryKind kind : kinds) {
    std::vector<Forward> forwards(n);
    std::vector<std::exception_ptr> failures(n);
    const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < count; ++i) {
      const auto& s = batch[i];
      const UnitEmbedding* ref = kind == QueryKind::TextOnly ? nullptr : &s.reference;
      const std::string* text = nullptr;
      if (kind == QueryKind::TextOnly) text = &s.caption;
      if (kind == QueryKind::Composed) text = &s.modification_text;
      try {
        forwards[i] = run_forward(params, featurizer, ref, text);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
    for (const auto& f : failures) {
      if (f) std::rethrow_exception(f);
    }
    RealMatrix queries(n, d.output_dim);
    for (std::size_t i = 0; i < n; ++i) std::copy(forwards[i].c.begin(), forwards[i].c.end(), queries.row(i).begin());

    const auto cl = contrastive_impl(queries, targets, params.tau, want_grad);
    out.loss += weight * cl.loss;
    if (want_grad) {
      out.grad.tau += weight * cl.d_tau;
      for (std::size_t i = 0; i < n; ++i) run_backward(params, forwards[i], cl.d_queries.row(i), weight, out.grad);
    }
  }
  return out;
}

}  // namespace

ComposerParams ComposerParams::zeros(const ComposerDims& dims) {
  if (dims.image_dim == 0 || dims.hidden_dim == 0 || dims.vocab_buckets == 0 || dims.output_dim == 0) {
    throw Error(ErrorKind::InvalidArgument, "composer dimensions must be positive");
  }
  ComposerParams p;
  p.dims = dims;
  p.adapter = Dense(dims.hidden_dim, dims.image_dim);
  p.fusion_in = Dense(dims.hidden_dim, dims.fusion_input());
  p.fusion_out = Dense(dims.hidden_dim, dims.hidden_dim);
  p.projection = Dense(dims.output_dim, dims.hidden_dim);
  p.tau = 0.0;
  return p;
}

ComposerParams ComposerParams::initialize(const ComposerDims& dims, double tau, std::uint64_t seed) {
  ComposerParams p = zeros(dims);
  Rng rng(mix_seed(seed, 0x1417));
  init_uniform(p.adapter, rng);
  init_uniform(p.fusion_in, rng);
  init_uniform(p.fusion_out, rng);
  init_uniform(p.projection, rng);
  p.tau = std::clamp(tau, kMinTau, kMaxTau);
  return p;
}

std::vector<std::span<double>> ComposerParams::tensors() {
  return {adapter.weight,    adapter.bias,    fusion_in.weight,  fusion_in.bias, fusion_out.weight,
          fusion_out.bias,   projection.weight, projection.bias, std::span<double>(&tau, 1)};
}

std::vector<std::span<const double>> ComposerParams::tensors() const {
  return {adapter.weight,    adapter.bias,    fusion_in.weight,  fusion_in.bias, fusion_out.weight,
          fusion_out.bias,   projection.weight, projection.bias, std::span<const double>(&tau, 1)};
}

std::size_t ComposerParams::parameter_count() const {
  std::size_t n = 0;
  for (auto t : tensors()) n += t.size();
  return n;
}

bool ComposerParams::all_finite() const {
  for (auto t : tensors()) {
    for (double x : t) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

void ComposerParams::validate() const {
  const auto& d = dims;
  const bool shapes_ok = adapter.out == d.hidden_dim && adapter.in == d.image_dim &&
                         fusion_in.out == d.hidden_dim && fusion_in.in == d.fusion_input() &&
                         fusion_out.out == d.hidden_dim && fusion_out.in == d.hidden_dim &&
                         projection.out == d.output_dim && projection.in == d.hidden_dim;
  if (!shapes_ok) throw Error(ErrorKind::InvalidArgument, "composer tensors do not match their dimensions");
  if (!all_finite()) throw Error(ErrorKind::NonFinite, "composer parameters contain non-finite values");
  if (tau < kMinTau || tau > kMaxTau) throw Error(ErrorKind::InvalidArgument, "tau outside [0.01, 1]");
}

bool operator==(const ComposerParams& a, const ComposerParams& b) {
  if (!(a.dims == b.dims)) return false;
  const auto ta = a.tensors();
  const auto tb = b.tensors();
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (!std::equal(ta[i].begin(), ta[i].end(), tb[i].begin(), tb[i].end())) return false;
  }
  return true;
}

std::vector<double> compose_exact(const ComposerParams& params, const UnitEmbedding* reference,
                                  const std::string* text) {
  const TextFeaturizer featurizer(params.dims.vocab_buckets);
  return run_forward(params, featurizer, reference, text).c;
}

UnitEmbedding compose(const ComposerParams& params, const std::optional<UnitEmbedding>& reference,
                      const std::optional<std::string>& text) {
  const auto c = compose_exact(params, reference ? &*reference : nullptr, text ? &*text : nullptr);
  return normalize_span(std::span<const double>(c));
}

double contrastive_loss(const RealMatrix& queries, const RealMatrix& targets, double tau) {
  return contrastive_impl(queries, targets, tau, false).loss;
}

ContrastiveGrad contrastive_loss_grad(const RealMatrix& queries, const RealMatrix& targets, double tau) {
  return contrastive_impl(queries, targets, tau, true);
}

double pretrain_loss(const ComposerParams& params, std::span<const TrainingSample> batch) {
  return evaluate_batch(params, batch, LossMode::Pretrain, false).loss;
}

double triplet_loss(const ComposerParams& params, std::span<const TrainingSample> batch) {
  return evaluate_batch(params, batch, LossMode::Triplet, false).loss;
}

double loss_value(const ComposerParams& params, std::span<const TrainingSample> batch, LossMode mode) {
  return evaluate_batch(params, batch, mode, false).loss;
}

LossGradients loss_gradients(const ComposerParams& params, std::span<const TrainingSample> batch, LossMode mode) {
  return evaluate_batch(params, batch, mode, true);
}

}  // namespace cir
