#pragma once

#include <array>
#include <cstdint>

#include <nlohmann/json.hpp>

#include "pollmgraph/hmm.hpp"
#include "pollmgraph/trace.hpp"

namespace pollmgraph {

enum class Generator { two_markov_chains, two_gaussian_clouds, known_hmm };

struct SyntheticSpec {
  Generator generator = Generator::two_gaussian_clouds;
  std::size_t n_traces = 200;  // labels alternate 0, 1, 0, ...
  std::size_t min_length = 20;
  std::size_t max_length = 20;
  std::size_t dim = 16;
  std::uint64_t seed = 0;
  double noise_sigma = 1.0;
  std::size_t n_categories = 0;  // > 0 tags trace i with "cat<i mod n>"

  // two-gaussian-clouds: each class is a mixture of `modes_per_class` centres
  // scattered (mode_spread * sigma) around its class mean; the class means sit
  // `separation` sigmas apart along the all-ones direction.
  double separation = 6.0;
  std::size_t modes_per_class = 3;
  double mode_spread = 1.0;
  bool identical_classes = false;

  // two-markov-chains: per-class initial vector and transition matrix.
  std::array<Vector, 2> chain_initial;
  std::array<Matrix, 2> chain_transition;

  // known-hmm: per-class parameters; an empty class-1 entry reuses class 0.
  std::array<Hmm, 2> hmm;

  // Symbol centres for chain/hmm generators are N(0, (symbol_spread * sigma)^2 I).
  double symbol_spread = 10.0;
};

// Seeded and bit-reproducible. Token t of trace i is named "w<t>".
Dataset generate_synthetic(const SyntheticSpec& spec);

// The latent symbol sequences behind generate_synthetic(spec), same order and
// labels. For clouds the symbol is class * modes_per_class + mode.
std::vector<AbstractTrace> generate_symbols(const SyntheticSpec& spec);

// Draws traces of fixed length from an HMM with the silent-s_0 convention.
std::vector<AbstractTrace> sample_hmm(const Hmm& hmm, std::size_t count, std::size_t length, std::uint64_t seed);

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j);

}  // namespace pollmgraph
