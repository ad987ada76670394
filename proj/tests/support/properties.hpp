#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lc/ir.hpp"

namespace lc::testing {

struct PropertyStats {
  std::size_t instances = 0;
  std::size_t failures = 0;
  std::size_t checks = 0;  // checker runs, when an instance needs more than one
  std::string first_failure;

  void fail(std::string why) {
    if (failures++ == 0) first_failure = std::move(why);
  }
};

// Each lemma check generates `n` instances starting at `seed` and compares
// the checker verdict before and after converting one variable.
PropertyStats lemma_linear_delta(std::uint64_t seed, std::size_t n);
PropertyStats lemma_delta_linear(std::uint64_t seed, std::size_t n);
PropertyStats lemma_omega_delta(std::uint64_t seed, std::size_t n);
// Alternatives accepted against irrelevant scrutinee resources, re-checked in
// WHNF mode for every assignment of those resources to the linear fields.
// Only accepted alternatives count towards `n`.
PropertyStats lemma_irrelevance(std::uint64_t seed, std::size_t n);

// parse(pretty(p)) is alpha-equivalent to p.
PropertyStats parser_round_trip(std::uint64_t seed, std::size_t n);

struct CorpusFile {
  std::string name;
  std::string expect;  // "accept" or "reject"
  std::string text;
};
// *.lc files sorted by name; the verdict comes from the "-- EXPECT:" header.
std::vector<CorpusFile> load_corpus(const std::filesystem::path& dir);
std::string read_text(const std::filesystem::path& file);

}  // namespace lc::testing
