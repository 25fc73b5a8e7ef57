#include "spe/episode.hpp"

#include <algorithm>
#include <numeric>

#include "spe/errors.hpp"

namespace spe {

namespace {

// Partial Fisher-Yates: the first `count` entries become a uniform sample
// without replacement.
std::vector<std::size_t> sample_without_replacement(std::vector<std::size_t> pool, std::size_t count, Rng& rng) {
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(count);
  return pool;
}

void append_input(std::vector<double>& out, const Dataset& dataset, const PreparedInputs& prepared, std::size_t i,
                  const OcclusionPolicy& policy, Rng& rng) {
  if (policy.mode == OcclusionMode::kClean) {
    const auto row = prepared.row(i);
    out.insert(out.end(), row.begin(), row.end());
    return;
  }
  const auto src = dataset.image(i);
  std::vector<float> image(src.begin(), src.end());
  occlude(image, dataset.shape, policy, rng);
  const auto x = prepared.transform.apply(image);
  out.insert(out.end(), x.begin(), x.end());
}

}  // namespace

void EpisodeSpec::validate() const {
  if (ways < 2) throw ConfigError("episodes need at least 2 ways");
  if (shots == 0) throw ConfigError("episodes need at least 1 shot");
  if (queries_per_class == 0) throw ConfigError("episodes need at least 1 query per class");
}

ClassIndex::ClassIndex(const Dataset& dataset) : members_(dataset.class_count()) {
  for (std::size_t i = 0; i < dataset.size(); ++i) members_.at(dataset.labels[i]).push_back(i);
}

void ClassIndex::check(const EpisodeSpec& spec) const {
  spec.validate();
  const auto need = spec.shots + spec.queries_per_class;
  std::size_t usable = 0;
  for (const auto& m : members_) usable += m.size() >= need ? 1 : 0;
  if (usable < spec.ways) {
    throw ConfigError("dataset has " + std::to_string(usable) + " classes with at least " + std::to_string(need) +
                      " instances; episodes need " + std::to_string(spec.ways));
  }
}

Episode sample_episode(const ClassIndex& index, const EpisodeSpec& spec, Rng& rng) {
  index.check(spec);
  const auto need = spec.shots + spec.queries_per_class;
  std::vector<std::size_t> eligible;
  for (std::size_t c = 0; c < index.class_count(); ++c) {
    if (index.members(c).size() >= need) eligible.push_back(c);
  }
  Episode ep;
  ep.classes = sample_without_replacement(std::move(eligible), spec.ways, rng);
  for (std::size_t w = 0; w < spec.ways; ++w) {
    const auto picked = sample_without_replacement(index.members(ep.classes[w]), need, rng);
    ep.support.emplace_back(picked.begin(), picked.begin() + static_cast<std::ptrdiff_t>(spec.shots));
    for (std::size_t q = spec.shots; q < need; ++q) ep.queries.push_back({picked[q], w});
  }
  return ep;
}

PreparedInputs prepare_inputs(const Dataset& dataset, const InputTransform& transform) {
  transform.validate();
  if (transform.image != dataset.shape || transform.mode != dataset.mode) {
    throw ConfigError("input transform does not match the dataset (" + to_string(dataset.mode) + ", " +
                      std::to_string(dataset.shape.height) + "x" + std::to_string(dataset.shape.width) + "x" +
                      std::to_string(dataset.shape.channels) + ")");
  }
  PreparedInputs out;
  out.transform = transform;
  out.dim = transform.input_dim();
  out.values.reserve(dataset.size() * out.dim);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto x = transform.apply(dataset.image(i));
    out.values.insert(out.values.end(), x.begin(), x.end());
  }
  return out;
}

EpisodeBatch materialize(const Dataset& dataset, const PreparedInputs& prepared, const Episode& episode,
                         const OcclusionPolicy& support_policy, const OcclusionPolicy& query_policy, Rng& rng) {
  EpisodeBatch batch;
  std::vector<double> support;
  std::size_t row = 0;
  for (const auto& members : episode.support) {
    std::vector<std::size_t> rows;
    for (auto i : members) {
      append_input(support, dataset, prepared, i, support_policy, rng);
      rows.push_back(row++);
    }
    batch.class_rows.push_back(std::move(rows));
  }
  std::vector<double> queries;
  for (const auto& q : episode.queries) {
    append_input(queries, dataset, prepared, q.index, query_policy, rng);
    batch.targets.push_back(q.target);
  }
  batch.support = Tensor({row, prepared.dim}, std::move(support));
  batch.queries = Tensor({episode.queries.size(), prepared.dim}, std::move(queries));
  return batch;
}

}  // namespace spe
