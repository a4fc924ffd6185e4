#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cir/composer.hpp"
#include "cir/embedding_io.hpp"
#include "cir/retrieval.hpp"
#include "cir/synthesis.hpp"

// Attribute-grid toy corpus: every item is an (object, color) combination
// whose embedding is a fixed mix of an object direction and a color direction.
// Composed queries pair a reference with the same object and another color
// with a text naming the target color, so retrieval needs both modalities.
namespace cir::synthetic {

struct CorpusConfig {
  std::size_t objects = 8;
  std::size_t colors = 8;
  std::size_t dim = 16;
  double object_weight = 1.0;
  double color_weight = 0.8;
  double noise = 0.05;
  std::uint64_t seed = 7;
};

struct Corpus {
  EmbeddingTable table;
  std::vector<CaptionedItem> items;
  std::vector<QueryRecord> queries;          // one composition query per item
  std::vector<TrainingSample> triplets;      // the same queries as training triplets
};

Corpus make_corpus(const CorpusConfig& cfg);

// Query text used for a target color.
std::string color_query_text(const std::string& color);

}  // namespace cir::synthetic
