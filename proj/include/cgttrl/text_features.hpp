#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace cgttrl {

// A document, after tokenization: ordered list of normalized terms.
using TokenSeq = std::vector<std::string>;

class EmptyCorpusError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};
class EmptyDocumentError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Recorded next to persisted feature vectors; bump whenever tokenize() can
// produce different output for the same input.
inline constexpr std::string_view kTokenizerTag = "cgttrl-tok-v1";

// Deterministic, total. Lowercases, segments on Unicode word boundaries,
// keeps numerals, drops punctuation. A backslash immediately followed by a
// letter starts a LaTeX control token ("\frac{1}{2}" -> "\frac", "1", "2"),
// so math queries keep their symbol-bearing terms.
TokenSeq tokenize(std::string_view text);

// Vocabulary and document frequencies fitted over a corpus of documents.
class CorpusStats {
 public:
  // Throws EmptyCorpusError when docs is empty. Term ids are assigned in
  // first-appearance order, so fitting is deterministic.
  static CorpusStats fit(const std::vector<TokenSeq>& docs);

  // Reconstruction from persisted form. Validates df ranges and term
  // uniqueness; throws std::invalid_argument on violation.
  static CorpusStats from_parts(std::vector<std::string> terms,
                                std::vector<std::int64_t> doc_freq,
                                std::int64_t num_docs);

  std::size_t num_docs() const { return static_cast<std::size_t>(num_docs_); }
  std::size_t vocab_size() const { return terms_.size(); }
  std::optional<std::int32_t> term_id(std::string_view term) const;
  const std::string& term(std::int32_t id) const { return terms_.at(static_cast<std::size_t>(id)); }
  std::int64_t doc_freq(std::int32_t id) const { return doc_freq_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& terms() const { return terms_; }
  const std::vector<std::int64_t>& doc_freqs() const { return doc_freq_; }

  // ln(num_docs / df) for an in-vocabulary term id.
  double idf(std::int32_t id) const;

  bool operator==(const CorpusStats& other) const {
    return num_docs_ == other.num_docs_ && terms_ == other.terms_ &&
           doc_freq_ == other.doc_freq_;
  }

 private:
  std::vector<std::string> terms_;                      // id -> term
  std::unordered_map<std::string, std::int32_t> ids_;   // term -> id
  std::vector<std::int64_t> doc_freq_;                  // id -> df
  std::int64_t num_docs_ = 0;
};

// count(term, doc) / |doc|. Throws EmptyDocumentError when |doc| = 0.
double tf(std::string_view term, const TokenSeq& doc);

// ln(num_docs / df). Out-of-vocabulary terms contribute 0 (query-time OOV
// convention), keeping this a total function.
double idf(std::string_view term, const CorpusStats& stats);

// term-id -> weight map with no explicit zeros and a cached Euclidean norm.
class SparseVector {
 public:
  using Entry = std::pair<std::int32_t, double>;

  SparseVector() = default;

  // Sorts by term id, drops zero weights, caches the norm. Throws
  // std::invalid_argument on duplicate ids or negative weights.
  static SparseVector from_entries(std::vector<Entry> entries);

  const std::vector<Entry>& entries() const { return entries_; }
  double norm() const { return norm_; }
  bool is_zero() const { return entries_.empty(); }

  double dot(const SparseVector& other) const;

  bool operator==(const SparseVector& other) const {
    return entries_ == other.entries_;
  }

 private:
  std::vector<Entry> entries_;  // sorted by term id
  double norm_ = 0.0;
};

enum class EmptyDocPolicy {
  kError,       // throw EmptyDocumentError
  kZeroVector,  // return the zero vector (used for queries at selection time)
};

// tf(t,d) * idf(t) for every distinct term of the document; zero-weight terms
// (absent, OOV, or df == num_docs) are omitted.
SparseVector tfidf_vector(const TokenSeq& doc, const CorpusStats& stats,
                          EmptyDocPolicy policy = EmptyDocPolicy::kError);

// dot(u,v) / (|u|·|v|), defined as 0 when either norm is 0. Weights are
// non-negative, so the result lies in [0,1].
double cosine_similarity(const SparseVector& u, const SparseVector& v);

}  // namespace cgttrl
