#include "cir/synthetic.hpp"

#include <array>
#include <cstdio>

#include "cir/error.hpp"
#include "cir/random.hpp"

namespace cir::synthetic {

namespace {

constexpr std::array<const char*, 12> kObjects = {"car",  "dog",  "chair", "lamp",  "boat",   "cup",
                                                  "shoe", "tree", "clock", "bench", "guitar", "kite"};
constexpr std::array<const char*, 12> kColors = {"red",   "blue",   "green", "yellow", "black", "white",
                                                 "orange", "purple", "pink",  "brown",  "gray",  "teal"};

std::vector<double> gaussian_direction(std::size_t dim, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(dim);
  double sq = 0.0;
  for (double& x : v) {
    x = g(rng);
    sq += x * x;
  }
  for (double& x : v) x /= std::sqrt(sq);
  return v;
}

std::string item_id(std::size_t object, std::size_t color) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "item_%02zu_%02zu", object, color);
  return buf;
}

}  // namespace

std::string color_query_text(const std::string& color) { return "make it " + color; }

Corpus make_corpus(const CorpusConfig& cfg) {
  if (cfg.objects < 2 || cfg.objects > kObjects.size() || cfg.colors < 2 || cfg.colors > kColors.size()) {
    throw Error(ErrorKind::InvalidArgument, "synthetic corpus supports 2..12 objects and colors");
  }
  Rng rng(mix_seed(cfg.seed, 0xc0de));
  std::vector<std::vector<double>> objects;
  std::vector<std::vector<double>> colors;
  for (std::size_t o = 0; o < cfg.objects; ++o) objects.push_back(gaussian_direction(cfg.dim, rng));
  for (std::size_t c = 0; c < cfg.colors; ++c) colors.push_back(gaussian_direction(cfg.dim, rng));

  std::normal_distribution<double> noise(0.0, cfg.noise);
  std::vector<ItemRecord> records;
  EmbeddingMatrix matrix;
  Corpus corpus;
  for (std::size_t o = 0; o < cfg.objects; ++o) {
    for (std::size_t c = 0; c < cfg.colors; ++c) {
      std::vector<double> v(cfg.dim);
      for (std::size_t k = 0; k < cfg.dim; ++k) {
        v[k] = cfg.object_weight * objects[o][k] + cfg.color_weight * colors[c][k] + noise(rng);
      }
      const auto unit = normalize_span(std::span<const double>(v));
      matrix.append(unit.values());
      const std::string caption = std::string("a ") + kColors[c] + " " + kObjects[o];
      records.push_back({item_id(o, c), caption, caption + " on a plain background"});
      corpus.items.push_back({item_id(o, c), caption, unit});
    }
  }
  corpus.table = EmbeddingTable(std::move(records), std::move(matrix));

  for (std::size_t o = 0; o < cfg.objects; ++o) {
    for (std::size_t c = 0; c < cfg.colors; ++c) {
      const std::size_t ref_color = (c + 1) % cfg.colors;
      const std::string target = item_id(o, c);
      const std::string reference = item_id(o, ref_color);
      const std::string text = color_query_text(kColors[c]);
      corpus.queries.push_back({"q_" + target, reference, text, {target}, std::nullopt});
      corpus.triplets.push_back({corpus.table.embedding(corpus.table.at(reference)), text,
                                 std::string("a ") + kColors[c] + " " + kObjects[o],
                                 corpus.table.embedding(corpus.table.at(target))});
    }
  }
  return corpus;
}

}  // namespace cir::synthetic
