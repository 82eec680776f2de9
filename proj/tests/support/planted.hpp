#ifndef SECTRA_TESTS_PLANTED_HPP_
#define SECTRA_TESTS_PLANTED_HPP_

#include <cstdint>

#include "sectra/corpus.hpp"

namespace sectra::testsupport {

// Synthetic corpus with planted topical relevance: papers cite earlier papers
// of their own topic, method sections carry topic-specific vocabulary, and
// background sentences are polluted with another topic's tokens. Island
// papers have abstracts but no citations either way; they only enlarge the
// negative pools.
struct PlantedConfig {
  int topics = 10;
  int papers_per_topic = 30;
  int islands = 0;
  std::uint64_t seed = 0;
};

Corpus make_planted_corpus(const PlantedConfig& config);

}  // namespace sectra::testsupport

#endif  // SECTRA_TESTS_PLANTED_HPP_
