#pragma once

// Episode sampling and materialization. An episode picks `ways` classes and,
// for each, `shots` support and `queries_per_class` query instances without
// replacement. Episodes hold dataset indices; materialize() turns them into
// encoder input batches, applying occlusion to the raw images first.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "spe/corruption.hpp"
#include "spe/dataset.hpp"
#include "spe/rng.hpp"
#include "spe/tensor.hpp"

namespace spe {

struct EpisodeSpec {
  std::size_t ways = 4;
  std::size_t shots = 2;
  std::size_t queries_per_class = 5;

  void validate() const;
  std::size_t support_count() const { return ways * shots; }
  std::size_t query_count() const { return ways * queries_per_class; }
};

/// Instance indices grouped by label.
class ClassIndex {
 public:
  explicit ClassIndex(const Dataset& dataset);

  std::size_t class_count() const { return members_.size(); }
  const std::vector<std::size_t>& members(std::size_t label) const { return members_.at(label); }
  /// Throws ConfigError unless enough classes hold shots + queries instances.
  void check(const EpisodeSpec& spec) const;

 private:
  std::vector<std::vector<std::size_t>> members_;
};

struct Query {
  std::size_t index = 0;   // dataset instance
  std::size_t target = 0;  // position in Episode::classes
};

struct Episode {
  std::vector<std::size_t> classes;               // dataset labels, one per way
  std::vector<std::vector<std::size_t>> support;  // dataset instances per way
  std::vector<Query> queries;                     // grouped by way
};

Episode sample_episode(const ClassIndex& index, const EpisodeSpec& spec, Rng& rng);

/// Clean encoder inputs for every instance of a dataset, computed once.
struct PreparedInputs {
  InputTransform transform;
  std::size_t dim = 0;
  std::vector<double> values;  // size() * dim

  std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
};

PreparedInputs prepare_inputs(const Dataset& dataset, const InputTransform& transform);

struct EpisodeBatch {
  Tensor support;                                  // [ways * shots, dim]
  std::vector<std::vector<std::size_t>> class_rows;  // rows of support per way
  Tensor queries;                                  // [query count, dim]
  std::vector<std::size_t> targets;
};

/// Builds input batches. Support images are occluded (in episode order)
/// before query images, all from rng; clean policies draw nothing.
EpisodeBatch materialize(const Dataset& dataset, const PreparedInputs& prepared, const Episode& episode,
                         const OcclusionPolicy& support_policy, const OcclusionPolicy& query_policy, Rng& rng);

}  // namespace spe
