#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cgttrl/context_pool.hpp"
#include "cgttrl/text_features.hpp"

namespace cgttrl {

class EmptyCandidateSetError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};
class QueryOnlyPoolError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};
class ProviderUnavailableError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Candidate with its similarity to the query. pool_pos is the example's
// position in the pool, which doubles as the deterministic tie-break.
struct ScoredCandidate {
  std::size_t pool_pos = 0;
  std::string id;
  double score = 0.0;

  friend bool operator==(const ScoredCandidate&, const ScoredCandidate&) = default;
};

// Chosen context: example copies plus the per-member score of the strategy
// that picked them (similarity for tfidf/hybrid, MMR objective for mmr,
// 0.0 for random), in pick order.
struct ContextSet {
  std::vector<ContextExample> members;
  std::vector<double> scores;
  std::string strategy_tag;

  std::size_t size() const { return members.size(); }
  bool empty() const { return members.empty(); }
};

// TF-IDF cosine of every candidate against query_text, pool order preserved.
// Throws QueryOnlyPoolError on pools without worked solutions and
// EmptyCandidateSetError when exclusion leaves nothing to rank.
std::vector<ScoredCandidate> score_all(
    const PoolIndex& index, std::string_view query_text,
    std::optional<std::string_view> exclude_id = std::nullopt);

// Top c by similarity; ties broken toward the lower pool position. c may
// exceed the candidate count, c == 0 yields an empty set.
ContextSet select_top_c(const PoolIndex& index,
                        const std::vector<ScoredCandidate>& scored, std::size_t c);

// Uniform sample of c candidates without replacement, in draw order.
ContextSet select_random(const PoolIndex& index, std::size_t c, std::uint64_t seed,
                         std::optional<std::string_view> exclude_id = std::nullopt);

// Maximal marginal relevance: first pick is the most relevant candidate,
// each later pick maximizes lambda*rel - (1-lambda)*max_sim_to_selected.
// lambda = 1 reduces to plain top-c; lambda outside [0,1] throws
// std::invalid_argument.
ContextSet select_mmr(const PoolIndex& index,
                      const std::vector<ScoredCandidate>& scored, std::size_t c,
                      double lambda = 0.5);

// Dense-embedding hook for the hybrid strategy. Implementations map text to
// a fixed-dimension vector; token-level providers also expose per-token
// vectors so queries can be embedded as weighted sums.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string name() const = 0;
  virtual std::size_t dimension() const = 0;
  virtual std::vector<double> embed_text(std::string_view text) = 0;
  virtual bool supports_tokens() const { return false; }
  virtual std::vector<double> embed_token(std::string_view /*token*/) {
    throw ProviderUnavailableError("token embeddings not supported");
  }
};

// Deterministic stand-in provider: densifies the pool TF-IDF space by
// hashing each term id into a fixed number of buckets. Exists so the hybrid
// path is exercisable without a real embedding model.
class TfidfDensifyProvider final : public EmbeddingProvider {
 public:
  TfidfDensifyProvider(const PoolIndex& index, std::size_t dimension = 64);
  std::string name() const override { return "tfidf-densify"; }
  std::size_t dimension() const override { return dimension_; }
  std::vector<double> embed_text(std::string_view text) override;
  bool supports_tokens() const override { return true; }
  std::vector<double> embed_token(std::string_view token) override;

 private:
  std::vector<double> densify(const SparseVector& vec) const;
  const PoolIndex& index_;
  std::size_t dimension_;
};

// Ranks candidates by cosine in the provider's embedding space and takes the
// top c. Token-capable providers embed the query as an IDF-weighted sum of
// token vectors; others embed the whole query text. Provider failures map to
// ProviderUnavailableError and never yield a partial set.
ContextSet select_hybrid(EmbeddingProvider& provider, const PoolIndex& index,
                         std::string_view query_text, std::size_t c,
                         std::optional<std::string_view> exclude_id = std::nullopt);

}  // namespace cgttrl
