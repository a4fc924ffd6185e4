#include "cir/synthesis.hpp"

#include <algorithm>
#include <array>
#include <string>

#include "cir/error.hpp"
#include "cir/kernels.hpp"
#include "cir/matrix.hpp"

namespace cir {

namespace {

// {T} is the target caption, {N} the neighbor caption.
constexpr std::array<std::string_view, kTemplateCount> kTemplates = {
    "show {T} instead of {N}",
    "{T} instead of {N}",
    "show {T} rather than {N}",
    "{T} rather than {N}",
    "rather than {N}, show {T}",
    "rather than {N}, {T}",
    "instead of {N}, {T}",
    "{N}, changed to {T}",
    "not {N}, but {T}",
    "show {T}, not {N}",
    "{N} is missing, {T}",
    "{T}, and {N} is missing",
    "remove {N}, add {T}",
    "add {T}, remove {N}",
    "{N} become {T}",
};

}  // namespace

void SynthConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error(ErrorKind::InvalidArgument, "synth.alpha must lie in [0, 1]");
  if (!(text_synthesis_ratio >= 0.0 && text_synthesis_ratio <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "synth.text_synthesis_ratio must lie in [0, 1]");
  }
  if (!(noise_sigma >= 0.0)) throw Error(ErrorKind::InvalidArgument, "synth.noise_sigma must be >= 0");
  if (template_ids.empty()) throw Error(ErrorKind::InvalidArgument, "synth.template_ids must not be empty");
  for (int t : template_ids) {
    if (t < 1 || t > kTemplateCount) throw Error(ErrorKind::UnknownTemplate, "template id " + std::to_string(t));
  }
}

UnitEmbedding augment_embedding(const UnitEmbedding& e, double sigma, Rng& rng) {
  if (sigma < 0.0) throw Error(ErrorKind::InvalidArgument, "sigma must be >= 0");
  if (sigma == 0.0) return e;
  std::normal_distribution<double> noise(0.0, sigma);
  std::vector<double> out(e.dim());
  for (std::size_t i = 0; i < e.dim(); ++i) out[i] = static_cast<double>(e[i]) + noise(rng);
  return normalize_span(std::span<const double>(out));
}

std::size_t nearest_in_batch(std::span<const UnitEmbedding> batch, std::size_t i) {
  if (batch.size() < 2) throw Error(ErrorKind::BatchTooSmall, "nearest neighbor needs a batch of at least 2");
  if (i >= batch.size()) throw Error(ErrorKind::InvalidArgument, "index outside batch");
  std::size_t best = i == 0 ? 1 : 0;
  double best_sim = cosine_sim(batch[i], batch[best]);
  for (std::size_t j = best + 1; j < batch.size(); ++j) {
    if (j == i) continue;
    const double s = cosine_sim(batch[i], batch[j]);
    if (s > best_sim) {
      best = j;
      best_sim = s;
    }
  }
  return best;
}

std::string synthesize_mod_text(std::string_view target, std::string_view neighbor, int template_id) {
  if (template_id < 1 || template_id > kTemplateCount) {
    throw Error(ErrorKind::UnknownTemplate, "template id " + std::to_string(template_id));
  }
  const std::string_view tmpl = kTemplates[static_cast<std::size_t>(template_id - 1)];
  std::string out;
  out.reserve(tmpl.size() + target.size() + neighbor.size());
  for (std::size_t k = 0; k < tmpl.size(); ++k) {
    if (tmpl.compare(k, 3, "{T}") == 0) {
      out += target;
      k += 2;
    } else if (tmpl.compare(k, 3, "{N}") == 0) {
      out += neighbor;
      k += 2;
    } else {
      out += tmpl[k];
    }
  }
  return out;
}

std::vector<SynthesizedTriplet> synthesize_batch(std::span<const CaptionedItem> items, const SynthConfig& cfg,
                                                 Rng& rng) {
  if (items.size() < 2) throw Error(ErrorKind::BatchTooSmall, "synthesis needs a batch of at least 2");
  cfg.validate();
  const std::size_t n = items.size();

  std::vector<UnitEmbedding> augmented;
  augmented.reserve(n);
  for (const auto& item : items) augmented.push_back(augment_embedding(item.embedding, cfg.noise_sigma, rng));

  std::vector<std::size_t> neighbor;
  if (cfg.neighbor_mode == NeighborMode::Nearest) {
    const auto m = EmbeddingMatrix::from_rows(augmented);
    auto sims = kernels::gram(m, m);
    for (double& s : sims) s = std::clamp(s, -1.0, 1.0);
    neighbor = kernels::argmax_off_diagonal(sims, n);
  }

  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_template(0, cfg.template_ids.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_other(0, n - 2);

  std::vector<SynthesizedTriplet> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = 0;
    if (cfg.neighbor_mode == NeighborMode::Nearest) {
      j = neighbor[i];
    } else {
      j = pick_other(rng);
      if (j >= i) ++j;
    }
    SynthesizedTriplet t;
    t.reference_embedding = slerp(augmented[i], augmented[j], cfg.alpha);
    t.target_id = items[i].id;
    t.neighbor_id = items[j].id;
    if (coin(rng) < cfg.text_synthesis_ratio) {
      const int tmpl = cfg.template_ids[pick_template(rng)];
      t.modification_text = synthesize_mod_text(items[i].caption, items[j].caption, tmpl);
      t.template_id = tmpl;
      t.text_was_synthesized = true;
    } else {
      t.modification_text = items[i].caption;
    }
    t.augmented_target = augmented[i];
    t.augmented_neighbor = augmented[j];
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace cir
