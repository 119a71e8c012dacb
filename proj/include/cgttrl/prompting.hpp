#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cgttrl/selection.hpp"

namespace cgttrl {

// The query plus directive alone exceed the prompt budget; nothing can be
// evicted to make it fit.
class QueryExceedsBudgetError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Rendering template for context-extended prompts. Placeholders: {query},
// {solution}, {response} in example_block; {test_query} in query_block.
struct PromptTemplate {
  std::string example_block =
      "Question: {query}\nSolution: {solution}\nFinal answer: {response}";
  std::string separator = "\n\n";
  std::string query_block = "Question: {test_query}";
  std::string answer_directive =
      "Work the problem step by step, then give the final answer as "
      "\\boxed{answer}.";

  // Parses a template file with [example], [separator], [query] and
  // [directive] section headers; absent sections keep the defaults.
  static PromptTemplate from_file(const std::filesystem::path& path);

  friend bool operator==(const PromptTemplate&, const PromptTemplate&) = default;
};

struct AssembledPrompt {
  std::string text;
  std::vector<std::string> context_ids;  // rendered order, least similar first
  std::vector<std::string> evicted_ids;  // eviction order
  std::size_t token_estimate = 0;
};

// Whitespace-run word count used as the token proxy for budget checks.
std::size_t estimate_tokens(std::string_view text);

// Renders context + query into one prompt. Members are ordered by ascending
// score so the most similar example sits adjacent to the query block; when
// the estimate exceeds max_prompt_tokens the least similar members are
// evicted from the front until it fits.
AssembledPrompt assemble_prompt(const ContextSet& context, std::string_view test_query,
                                const PromptTemplate& tmpl,
                                std::size_t max_prompt_tokens);

}  // namespace cgttrl
