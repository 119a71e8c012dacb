#pragma once

// Shared randomized and hand-written fixtures for tests.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cgttrl/context_pool.hpp"
#include "cgttrl/text_features.hpp"

namespace fixtures {

// Random corpus of up to max_docs documents over up to max_terms distinct
// synthetic terms ("t0".."tN"), each document 1..30 tokens.
inline std::vector<cgttrl::TokenSeq> random_corpus(std::mt19937_64& rng,
                                                   int max_docs = 20,
                                                   int max_terms = 50) {
  std::uniform_int_distribution<int> docs_dist(1, max_docs);
  std::uniform_int_distribution<int> terms_dist(1, max_terms);
  const int num_docs = docs_dist(rng);
  const int num_terms = terms_dist(rng);
  std::uniform_int_distribution<int> len_dist(1, 30);
  std::uniform_int_distribution<int> term_dist(0, num_terms - 1);

  std::vector<cgttrl::TokenSeq> docs;
  docs.reserve(static_cast<std::size_t>(num_docs));
  for (int d = 0; d < num_docs; ++d) {
    cgttrl::TokenSeq doc;
    const int len = len_dist(rng);
    for (int i = 0; i < len; ++i)
      doc.push_back("t" + std::to_string(term_dist(rng)));
    docs.push_back(std::move(doc));
  }
  return docs;
}

// A token sequence over the same synthetic vocabulary, possibly with terms
// the corpus has never seen (ids up to max_terms + 5).
inline cgttrl::TokenSeq random_query_doc(std::mt19937_64& rng, int max_terms = 50) {
  std::uniform_int_distribution<int> len_dist(1, 15);
  std::uniform_int_distribution<int> term_dist(0, max_terms + 5);
  cgttrl::TokenSeq doc;
  const int len = len_dist(rng);
  for (int i = 0; i < len; ++i) doc.push_back("t" + std::to_string(term_dist(rng)));
  return doc;
}

// Random worked-example pool with term-salad queries; suitable for
// selection-level fuzzing where only similarity structure matters.
inline std::vector<cgttrl::ContextExample> random_pool(std::mt19937_64& rng,
                                                       int max_examples = 20,
                                                       int max_terms = 30) {
  std::uniform_int_distribution<int> size_dist(2, max_examples);
  const int n = size_dist(rng);
  std::uniform_int_distribution<int> len_dist(2, 12);
  std::uniform_int_distribution<int> term_dist(0, max_terms - 1);
  std::uniform_int_distribution<int> num_dist(1, 99);

  std::vector<cgttrl::ContextExample> pool;
  pool.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    cgttrl::ContextExample ex;
    ex.id = "ex-" + std::to_string(i);
    const int len = len_dist(rng);
    for (int t = 0; t < len; ++t) {
      if (t) ex.query += ' ';
      ex.query += "w" + std::to_string(term_dist(rng));
    }
    const int answer = num_dist(rng);
    ex.solution = "Compute the value step by step to get " + std::to_string(answer) + ".";
    ex.response = std::to_string(answer);
    pool.push_back(std::move(ex));
  }
  return pool;
}

// A raw query string over the same w0..wN vocabulary.
inline std::string random_query_text(std::mt19937_64& rng, int max_terms = 30) {
  std::uniform_int_distribution<int> len_dist(1, 10);
  std::uniform_int_distribution<int> term_dist(0, max_terms + 4);
  std::string query;
  const int len = len_dist(rng);
  for (int i = 0; i < len; ++i) {
    if (i) query += ' ';
    query += "w" + std::to_string(term_dist(rng));
  }
  return query;
}

// Fifteen grade-school word problems with worked solutions — a small
// realistic pool for end-to-end and CLI tests.
inline std::vector<cgttrl::ContextExample> gsm_pool() {
  auto ex = [](std::string id, std::string q, std::string s, std::string r) {
    cgttrl::ContextExample e;
    e.id = std::move(id);
    e.query = std::move(q);
    e.solution = std::move(s);
    e.response = std::move(r);
    return e;
  };
  return {
      ex("gsm-01", "Maya has 4 baskets with 6 apples each. How many apples does she have?",
         "Each basket holds 6 apples and there are 4 baskets, so 4 * 6 = 24.", "24"),
      ex("gsm-02", "A train travels 60 miles per hour for 3 hours. How far does it go?",
         "Distance is speed times time: 60 * 3 = 180 miles.", "180"),
      ex("gsm-03", "Liam buys 3 pencils at 25 cents each. How much does he pay in cents?",
         "Three pencils at 25 cents each cost 3 * 25 = 75 cents.", "75"),
      ex("gsm-04", "A farmer has 17 sheep and sells 9. How many sheep remain?",
         "Subtract the sold sheep: 17 - 9 = 8.", "8"),
      ex("gsm-05", "Ava reads 12 pages a day. How many pages does she read in a week?",
         "A week has 7 days, so 12 * 7 = 84 pages.", "84"),
      ex("gsm-06", "Noah splits 56 marbles evenly among 8 friends. How many does each get?",
         "Divide the marbles: 56 / 8 = 7 marbles each.", "7"),
      ex("gsm-07", "A rectangle is 9 cm long and 4 cm wide. What is its area?",
         "Area is length times width: 9 * 4 = 36 square cm.", "36"),
      ex("gsm-08", "Emma saves 5 dollars each week for 11 weeks. How much does she save?",
         "Savings are 5 * 11 = 55 dollars.", "55"),
      ex("gsm-09", "A baker makes 48 rolls and packs them 6 to a bag. How many bags?",
         "Divide rolls by bag size: 48 / 6 = 8 bags.", "8"),
      ex("gsm-10", "Jack is 3 years older than Jill, who is 14. How old is Jack?",
         "Add the difference: 14 + 3 = 17.", "17"),
      ex("gsm-11", "A tank holds 90 liters and is one third full. How many liters are in it?",
         "One third of 90 is 90 / 3 = 30 liters.", "30"),
      ex("gsm-12", "Sam scores 7, 9 and 14 points in three games. What is his total?",
         "Add the scores: 7 + 9 + 14 = 30.", "30"),
      ex("gsm-13", "A shirt costs 40 dollars with a 25 percent discount. What is the sale price?",
         "The discount is 40 * 0.25 = 10, so the price is 40 - 10 = 30 dollars.", "30"),
      ex("gsm-14", "There are 5 rows of chairs with 12 chairs per row. How many chairs?",
         "Multiply rows by chairs per row: 5 * 12 = 60.", "60"),
      ex("gsm-15", "A car uses 8 liters of fuel per 100 km. How many liters for 250 km?",
         "Fuel is 8 * 250 / 100 = 20 liters.", "20"),
  };
}

// Synthetic pool of n examples with overlapping topical vocabularies, for
// persistence round trips and scale checks.
inline std::vector<cgttrl::ContextExample> generated_pool(int n) {
  static const char* topics[] = {"triangle", "prime",   "velocity", "fraction",
                                 "integral", "matrix",  "angle",    "polygon",
                                 "sequence", "interest"};
  static const char* verbs[] = {"compute", "find", "determine", "evaluate"};
  std::vector<cgttrl::ContextExample> pool;
  pool.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    cgttrl::ContextExample ex;
    ex.id = "gen-" + std::to_string(i);
    const char* topic = topics[i % 10];
    const char* verb = verbs[i % 4];
    ex.query = std::string(verb) + " the " + topic + " value for case " +
               std::to_string(i) + " with parameter " + std::to_string(i % 7);
    ex.solution = "Apply the " + std::string(topic) + " rule to case " +
                  std::to_string(i) + " and simplify to " + std::to_string(i % 100) + ".";
    ex.response = std::to_string(i % 100);
    pool.push_back(std::move(ex));
  }
  return pool;
}

}  // namespace fixtures
