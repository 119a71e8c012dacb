#include "cgttrl/text_features.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace cgttrl {

namespace {

// Decodes one UTF-8 code point starting at `i`. Invalid bytes decode as a
// single-byte replacement that classifies as a separator.
struct Decoded {
  char32_t cp;
  std::size_t len;
};

Decoded decode_utf8(std::string_view s, std::size_t i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) return {b0, 1};
  auto cont = [&](std::size_t k) {
    return i + k < s.size() &&
           (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
  };
  auto bits = [&](std::size_t k) {
    return static_cast<char32_t>(static_cast<unsigned char>(s[i + k]) & 0x3F);
  };
  if ((b0 & 0xE0) == 0xC0 && cont(1)) {
    return {static_cast<char32_t>((b0 & 0x1F) << 6) | bits(1), 2};
  }
  if ((b0 & 0xF0) == 0xE0 && cont(1) && cont(2)) {
    return {static_cast<char32_t>((b0 & 0x0F) << 12) | (bits(1) << 6) | bits(2), 3};
  }
  if ((b0 & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3)) {
    return {static_cast<char32_t>((b0 & 0x07) << 18) | (bits(1) << 12) |
                (bits(2) << 6) | bits(3),
            4};
  }
  return {0xFFFD, 1};
}

bool is_ascii_letter(char32_t cp) {
  return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
}

bool is_word_cp(char32_t cp) {
  if (cp < 0x80) {
    return is_ascii_letter(cp) || (cp >= '0' && cp <= '9');
  }
  if (cp < 0xC0) return false;                   // Latin-1 punctuation and symbols
  if (cp == 0x00D7 || cp == 0x00F7) return false;  // multiplication, division signs
  if (cp >= 0x2000 && cp <= 0x206F) return false;  // general punctuation
  if (cp >= 0x3000 && cp <= 0x303F) return false;  // CJK punctuation
  if (cp == 0xFFFD) return false;
  return true;
}

// ASCII plus Latin-1 case folding; other scripts pass through unchanged.
char32_t lower_cp(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
  if (cp >= 0x00C0 && cp <= 0x00DE && cp != 0x00D7) return cp + 0x20;
  return cp;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

}  // namespace

TokenSeq tokenize(std::string_view text) {
  TokenSeq tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  };
  std::size_t i = 0;
  while (i < text.size()) {
    // LaTeX control sequence: backslash + letter run kept as one token.
    if (text[i] == '\\' && i + 1 < text.size() &&
        is_ascii_letter(static_cast<unsigned char>(text[i + 1]))) {
      flush();
      current.push_back('\\');
      ++i;
      while (i < text.size() &&
             is_ascii_letter(static_cast<unsigned char>(text[i]))) {
        current.push_back(static_cast<char>(
            lower_cp(static_cast<unsigned char>(text[i]))));
        ++i;
      }
      flush();
      continue;
    }
    const Decoded d = decode_utf8(text, i);
    if (is_word_cp(d.cp)) {
      append_utf8(current, lower_cp(d.cp));
    } else {
      flush();
    }
    i += d.len;
  }
  flush();
  return tokens;
}

CorpusStats CorpusStats::fit(const std::vector<TokenSeq>& docs) {
  if (docs.empty()) throw EmptyCorpusError("cannot fit corpus stats: no documents");
  CorpusStats stats;
  stats.num_docs_ = static_cast<std::int64_t>(docs.size());
  std::vector<std::int64_t> last_doc;  // per term: last document that counted it
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (const std::string& token : docs[d]) {
      auto [it, inserted] = stats.ids_.try_emplace(
          token, static_cast<std::int32_t>(stats.terms_.size()));
      if (inserted) {
        stats.terms_.push_back(token);
        stats.doc_freq_.push_back(0);
        last_doc.push_back(-1);
      }
      const auto id = static_cast<std::size_t>(it->second);
      if (last_doc[id] != static_cast<std::int64_t>(d)) {
        last_doc[id] = static_cast<std::int64_t>(d);
        ++stats.doc_freq_[id];
      }
    }
  }
  return stats;
}

CorpusStats CorpusStats::from_parts(std::vector<std::string> terms,
                                    std::vector<std::int64_t> doc_freq,
                                    std::int64_t num_docs) {
  if (num_docs < 1) throw std::invalid_argument("corpus stats: num_docs must be >= 1");
  if (terms.size() != doc_freq.size()) {
    throw std::invalid_argument("corpus stats: vocab and doc_freq sizes differ");
  }
  CorpusStats stats;
  stats.num_docs_ = num_docs;
  stats.terms_ = std::move(terms);
  stats.doc_freq_ = std::move(doc_freq);
  for (std::size_t i = 0; i < stats.terms_.size(); ++i) {
    const std::int64_t df = stats.doc_freq_[i];
    if (df < 1 || df > num_docs) {
      throw std::invalid_argument("corpus stats: doc_freq out of [1, num_docs]");
    }
    auto [it, inserted] =
        stats.ids_.try_emplace(stats.terms_[i], static_cast<std::int32_t>(i));
    if (!inserted) throw std::invalid_argument("corpus stats: duplicate term in vocab");
  }
  return stats;
}

std::optional<std::int32_t> CorpusStats::term_id(std::string_view term) const {
  auto it = ids_.find(std::string(term));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

double CorpusStats::idf(std::int32_t id) const {
  return std::log(static_cast<double>(num_docs_) /
                  static_cast<double>(doc_freq_.at(static_cast<std::size_t>(id))));
}

double tf(std::string_view term, const TokenSeq& doc) {
  if (doc.empty()) throw EmptyDocumentError("tf undefined for an empty document");
  std::size_t count = 0;
  for (const std::string& t : doc) {
    if (t == term) ++count;
  }
  return static_cast<double>(count) / static_cast<double>(doc.size());
}

double idf(std::string_view term, const CorpusStats& stats) {
  const auto id = stats.term_id(term);
  if (!id) return 0.0;
  return stats.idf(*id);
}

SparseVector SparseVector::from_entries(std::vector<Entry> entries) {
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.first < b.first; });
  SparseVector v;
  double sq = 0.0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& [id, w] = entries[i];
    if (w < 0.0) throw std::invalid_argument("sparse vector: negative weight");
    if (i > 0 && entries[i - 1].first == id) {
      throw std::invalid_argument("sparse vector: duplicate term id");
    }
    if (w == 0.0) continue;
    v.entries_.emplace_back(id, w);
    sq += w * w;
  }
  v.norm_ = std::sqrt(sq);
  return v;
}

double SparseVector::dot(const SparseVector& other) const {
  double sum = 0.0;
  std::size_t i = 0, j = 0;
  while (i < entries_.size() && j < other.entries_.size()) {
    const auto a = entries_[i].first;
    const auto b = other.entries_[j].first;
    if (a < b) {
      ++i;
    } else if (b < a) {
      ++j;
    } else {
      sum += entries_[i].second * other.entries_[j].second;
      ++i;
      ++j;
    }
  }
  return sum;
}

SparseVector tfidf_vector(const TokenSeq& doc, const CorpusStats& stats,
                          EmptyDocPolicy policy) {
  if (doc.empty()) {
    if (policy == EmptyDocPolicy::kError) {
      throw EmptyDocumentError("tfidf_vector: empty document");
    }
    return {};
  }
  // Counts keyed by term id; std::map keeps the entry order deterministic.
  std::map<std::int32_t, std::int64_t> counts;
  for (const std::string& token : doc) {
    if (const auto id = stats.term_id(token)) ++counts[*id];
  }
  const auto len = static_cast<double>(doc.size());
  std::vector<SparseVector::Entry> entries;
  entries.reserve(counts.size());
  for (const auto& [id, count] : counts) {
    const double w = (static_cast<double>(count) / len) * stats.idf(id);
    if (w > 0.0) entries.emplace_back(id, w);
  }
  return SparseVector::from_entries(std::move(entries));
}

double cosine_similarity(const SparseVector& u, const SparseVector& v) {
  if (u.norm() == 0.0 || v.norm() == 0.0) return 0.0;
  const double sim = u.dot(v) / (u.norm() * v.norm());
  return std::min(sim, 1.0);
}

}  // namespace cgttrl
