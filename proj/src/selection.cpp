#include "cgttrl/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "cgttrl/rng.hpp"

namespace cgttrl {

namespace {

void require_worked_pool(const PoolIndex& index) {
  if (index.query_only())
    throw QueryOnlyPoolError(
        "pool contains query-only examples and cannot provide context");
}

ContextSet make_set(const PoolIndex& index, const std::vector<std::size_t>& picks,
                    const std::vector<double>& scores, std::string tag) {
  ContextSet set;
  set.members.reserve(picks.size());
  for (std::size_t pos : picks) set.members.push_back(index.example(pos));
  set.scores = scores;
  set.strategy_tag = std::move(tag);
  return set;
}

double dense_cosine(const std::vector<double>& u, const std::vector<double>& v) {
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return std::min(dot / (std::sqrt(nu) * std::sqrt(nv)), 1.0);
}

}  // namespace

std::vector<ScoredCandidate> score_all(const PoolIndex& index,
                                       std::string_view query_text,
                                       std::optional<std::string_view> exclude_id) {
  require_worked_pool(index);
  const auto positions = index.candidates(exclude_id);
  if (positions.empty())
    throw EmptyCandidateSetError("no candidates remain after exclusion");

  const SparseVector query_vec =
      tfidf_vector(tokenize(query_text), index.stats(), EmptyDocPolicy::kZeroVector);
  std::vector<ScoredCandidate> out;
  out.reserve(positions.size());
  for (std::size_t pos : positions) {
    ScoredCandidate c;
    c.pool_pos = pos;
    c.id = index.example(pos).id;
    c.score = cosine_similarity(query_vec, index.features(pos));
    out.push_back(std::move(c));
  }
  return out;
}

ContextSet select_top_c(const PoolIndex& index,
                        const std::vector<ScoredCandidate>& scored, std::size_t c) {
  require_worked_pool(index);
  std::vector<std::size_t> order(scored.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scored[a].score != scored[b].score) return scored[a].score > scored[b].score;
    return scored[a].pool_pos < scored[b].pool_pos;
  });

  const std::size_t take = std::min(c, scored.size());
  std::vector<std::size_t> picks;
  std::vector<double> scores;
  picks.reserve(take);
  scores.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    picks.push_back(scored[order[i]].pool_pos);
    scores.push_back(scored[order[i]].score);
  }
  return make_set(index, picks, scores, "tfidf");
}

ContextSet select_random(const PoolIndex& index, std::size_t c, std::uint64_t seed,
                         std::optional<std::string_view> exclude_id) {
  require_worked_pool(index);
  const auto positions = index.candidates(exclude_id);
  if (positions.empty())
    throw EmptyCandidateSetError("no candidates remain after exclusion");

  const std::size_t take = std::min(c, positions.size());
  Rng rng(seed);
  const auto drawn = rng.sample_without_replacement(positions.size(), take);
  std::vector<std::size_t> picks;
  picks.reserve(take);
  for (std::size_t idx : drawn) picks.push_back(positions[idx]);
  return make_set(index, picks, std::vector<double>(take, 0.0), "random");
}

ContextSet select_mmr(const PoolIndex& index,
                      const std::vector<ScoredCandidate>& scored, std::size_t c,
                      double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw std::invalid_argument("mmr lambda must lie in [0, 1]");
  require_worked_pool(index);
  const std::size_t take = std::min(c, scored.size());
  std::vector<std::size_t> picks;      // pool positions
  std::vector<double> objectives;      // objective value at pick time
  std::vector<bool> used(scored.size(), false);
  picks.reserve(take);
  objectives.reserve(take);

  for (std::size_t round = 0; round < take; ++round) {
    std::size_t best = scored.size();
    double best_obj = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < scored.size(); ++i) {
      if (used[i]) continue;
      double obj;
      if (picks.empty()) {
        // First pick: pure relevance, so lambda = 0 still starts from the
        // most relevant example.
        obj = scored[i].score;
      } else {
        double max_sim = 0.0;
        for (std::size_t sel : picks)
          max_sim = std::max(max_sim, cosine_similarity(index.features(scored[i].pool_pos),
                                                        index.features(sel)));
        obj = lambda * scored[i].score - (1.0 - lambda) * max_sim;
      }
      const bool better =
          obj > best_obj ||
          (obj == best_obj && best < scored.size() &&
           scored[i].pool_pos < scored[best].pool_pos);
      if (best == scored.size() || better) {
        best = i;
        best_obj = obj;
      }
    }
    used[best] = true;
    picks.push_back(scored[best].pool_pos);
    objectives.push_back(best_obj);
  }
  return make_set(index, picks, objectives, "mmr");
}

TfidfDensifyProvider::TfidfDensifyProvider(const PoolIndex& index,
                                           std::size_t dimension)
    : index_(index), dimension_(dimension) {
  if (dimension_ == 0) throw ProviderUnavailableError("embedding dimension is zero");
}

std::vector<double> TfidfDensifyProvider::densify(const SparseVector& vec) const {
  std::vector<double> dense(dimension_, 0.0);
  for (const auto& [term_id, w] : vec.entries()) {
    // splitmix64 of the term id gives a stable bucket and sign.
    std::uint64_t s = 0x9e3779b97f4a7c15ULL ^ static_cast<std::uint64_t>(term_id);
    const std::uint64_t h = splitmix64(s);
    const std::size_t bucket = static_cast<std::size_t>(h % dimension_);
    const double sign = (h >> 63) ? -1.0 : 1.0;
    dense[bucket] += sign * w;
  }
  return dense;
}

std::vector<double> TfidfDensifyProvider::embed_text(std::string_view text) {
  return densify(
      tfidf_vector(tokenize(text), index_.stats(), EmptyDocPolicy::kZeroVector));
}

std::vector<double> TfidfDensifyProvider::embed_token(std::string_view token) {
  const auto id = index_.stats().term_id(token);
  if (!id) return std::vector<double>(dimension_, 0.0);
  SparseVector unit = SparseVector::from_entries({{*id, 1.0}});
  return densify(unit);
}

ContextSet select_hybrid(EmbeddingProvider& provider, const PoolIndex& index,
                         std::string_view query_text, std::size_t c,
                         std::optional<std::string_view> exclude_id) {
  require_worked_pool(index);
  const auto positions = index.candidates(exclude_id);
  if (positions.empty())
    throw EmptyCandidateSetError("no candidates remain after exclusion");

  std::vector<double> query_vec;
  std::vector<std::vector<double>> cand_vecs;
  try {
    const std::size_t dim = provider.dimension();
    if (provider.supports_tokens()) {
      // IDF-weighted sum of token embeddings; OOV tokens embed to zero.
      query_vec.assign(dim, 0.0);
      for (const auto& tok : tokenize(query_text)) {
        const auto vec = provider.embed_token(tok);
        if (vec.size() != dim)
          throw ProviderUnavailableError("provider returned wrong dimension");
        const auto id = index.stats().term_id(tok);
        const double w = id ? index.stats().idf(*id) : 0.0;
        if (w <= 0.0) continue;
        for (std::size_t i = 0; i < dim; ++i) query_vec[i] += w * vec[i];
      }
    } else {
      query_vec = provider.embed_text(query_text);
      if (query_vec.size() != dim)
        throw ProviderUnavailableError("provider returned wrong dimension");
    }
    cand_vecs.reserve(positions.size());
    for (std::size_t pos : positions) {
      auto vec = provider.embed_text(index.example(pos).query);
      if (vec.size() != dim)
        throw ProviderUnavailableError("provider returned wrong dimension");
      cand_vecs.push_back(std::move(vec));
    }
  } catch (const ProviderUnavailableError&) {
    throw;
  } catch (const std::exception& e) {
    throw ProviderUnavailableError(std::string("embedding provider failed: ") +
                                   e.what());
  }

  std::vector<ScoredCandidate> scored;
  scored.reserve(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    ScoredCandidate cand;
    cand.pool_pos = positions[i];
    cand.id = index.example(positions[i]).id;
    cand.score = dense_cosine(query_vec, cand_vecs[i]);
    scored.push_back(std::move(cand));
  }
  ContextSet set = select_top_c(index, scored, c);
  set.strategy_tag = "hybrid:" + provider.name();
  return set;
}

}  // namespace cgttrl
