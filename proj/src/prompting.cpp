#include "cgttrl/prompting.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cgttrl/context_pool.hpp"

namespace cgttrl {

namespace {

std::string replace_all(std::string text, std::string_view what,
                        std::string_view with) {
  std::size_t pos = 0;
  while ((pos = text.find(what, pos)) != std::string::npos) {
    text.replace(pos, what.size(), with);
    pos += with.size();
  }
  return text;
}

std::string render_example(const PromptTemplate& tmpl, const ContextExample& ex) {
  std::string block = tmpl.example_block;
  block = replace_all(std::move(block), "{query}", ex.query);
  block = replace_all(std::move(block), "{solution}", ex.solution);
  block = replace_all(std::move(block), "{response}", ex.response);
  return block;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

PromptTemplate PromptTemplate::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string data = buf.str();

  PromptTemplate tmpl;
  std::string* target = nullptr;
  std::string pending;
  auto flush = [&] {
    if (!target) return;
    // Section content is everything between headers with the final newline
    // stripped, so a one-line section is exactly that line.
    if (!pending.empty() && pending.back() == '\n') pending.pop_back();
    *target = pending;
    pending.clear();
    target = nullptr;
  };

  std::istringstream lines(data);
  std::string line;
  while (std::getline(lines, line)) {
    if (line == "[example]") {
      flush();
      target = &tmpl.example_block;
    } else if (line == "[separator]") {
      flush();
      target = &tmpl.separator;
    } else if (line == "[query]") {
      flush();
      target = &tmpl.query_block;
    } else if (line == "[directive]") {
      flush();
      target = &tmpl.answer_directive;
    } else if (target) {
      pending += line;
      pending += '\n';
    }
  }
  flush();
  return tmpl;
}

std::size_t estimate_tokens(std::string_view text) {
  std::size_t count = 0;
  bool in_word = false;
  for (unsigned char ch : text) {
    const bool ws = std::isspace(ch) != 0;
    if (!ws && !in_word) ++count;
    in_word = !ws;
  }
  return count;
}

AssembledPrompt assemble_prompt(const ContextSet& context, std::string_view test_query,
                                const PromptTemplate& tmpl,
                                std::size_t max_prompt_tokens) {
  std::string query_part =
      replace_all(tmpl.query_block, "{test_query}", test_query);

  // Ascending similarity, stable on pick order: the strongest example lands
  // directly above the query, and the weakest is first in line for eviction.
  std::vector<std::size_t> order(context.members.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return context.scores.at(a) < context.scores.at(b);
  });

  auto build = [&](std::size_t skip_front) {
    std::vector<std::string> parts;
    std::vector<std::string> ids;
    for (std::size_t i = skip_front; i < order.size(); ++i) {
      parts.push_back(render_example(tmpl, context.members[order[i]]));
      ids.push_back(context.members[order[i]].id);
    }
    parts.push_back(query_part);
    parts.push_back(tmpl.answer_directive);
    AssembledPrompt out;
    out.text = join(parts, tmpl.separator);
    out.context_ids = std::move(ids);
    out.token_estimate = estimate_tokens(out.text);
    return out;
  };

  for (std::size_t skip = 0; skip <= order.size(); ++skip) {
    AssembledPrompt attempt = build(skip);
    if (attempt.token_estimate <= max_prompt_tokens) {
      for (std::size_t i = 0; i < skip; ++i)
        attempt.evicted_ids.push_back(context.members[order[i]].id);
      return attempt;
    }
  }
  throw QueryExceedsBudgetError(
      "query and directive alone exceed the prompt budget of " +
      std::to_string(max_prompt_tokens) + " tokens");
}

}  // namespace cgttrl
