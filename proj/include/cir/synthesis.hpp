#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cir/embedding.hpp"
#include "cir/random.hpp"

namespace cir {

struct CaptionedItem {
  std::string id;
  std::string caption;
  UnitEmbedding embedding;
};

enum class NeighborMode {
  Nearest,  // in-batch nearest neighbor
  Random,   // uniformly random other batch member (ablation baseline)
};

inline constexpr int kTemplateCount = 15;

struct SynthConfig {
  double alpha = 0.5;
  double text_synthesis_ratio = 0.75;
  double noise_sigma = 0.05;
  std::vector<int> template_ids = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};
  NeighborMode neighbor_mode = NeighborMode::Nearest;

  // Throws InvalidArgument on out-of-range values.
  void validate() const;
};

struct SynthesizedTriplet {
  UnitEmbedding reference_embedding;  // slerp of augmented target and neighbor
  std::string modification_text;
  std::string target_id;
  std::string neighbor_id;
  std::optional<int> template_id;  // set iff text_was_synthesized
  bool text_was_synthesized = false;

  // Provenance, not serialized.
  UnitEmbedding augmented_target;
  UnitEmbedding augmented_neighbor;
};

// normalize(e + N(0, sigma^2 I)). sigma == 0 returns e untouched and draws nothing.
UnitEmbedding augment_embedding(const UnitEmbedding& e, double sigma, Rng& rng);

// argmax_{j != i} cosine_sim(batch[i], batch[j]); smallest j on ties.
std::size_t nearest_in_batch(std::span<const UnitEmbedding> batch, std::size_t i);

// Fills template `template_id` (1-based) with the target caption `target`
// and the neighbor caption `neighbor`.
std::string synthesize_mod_text(std::string_view target, std::string_view neighbor, int template_id);

// Synthesizes one triplet per item. Draw order on `rng`: one augmentation per
// item in batch order, then per item: [random neighbor draw,] text coin flip,
// [template draw].
std::vector<SynthesizedTriplet> synthesize_batch(std::span<const CaptionedItem> items, const SynthConfig& cfg,
                                                 Rng& rng);

}  // namespace cir
