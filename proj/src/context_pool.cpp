#include "cgttrl/context_pool.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace cgttrl {

using nlohmann::json;

namespace {

std::string loc(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json j = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw FormatError(path.string() + ": invalid JSON");
  return j;
}

}  // namespace

std::vector<ContextExample> read_pool_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<ContextExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object())
      throw FormatError(loc(path, line_no) + ": expected a JSON object");
    ContextExample ex;
    if (!j.contains("id") || !j["id"].is_string())
      throw FormatError(loc(path, line_no) + ": missing string field \"id\"");
    if (!j.contains("query") || !j["query"].is_string())
      throw FormatError(loc(path, line_no) + ": missing string field \"query\"");
    ex.id = j["id"].get<std::string>();
    ex.query = j["query"].get<std::string>();
    if (j.contains("solution")) {
      if (!j["solution"].is_string())
        throw FormatError(loc(path, line_no) + ": field \"solution\" must be a string");
      ex.solution = j["solution"].get<std::string>();
    }
    if (j.contains("response")) {
      if (!j["response"].is_string())
        throw FormatError(loc(path, line_no) + ": field \"response\" must be a string");
      ex.response = j["response"].get<std::string>();
    }
    out.push_back(std::move(ex));
  }
  return out;
}

PoolIndex PoolIndex::build(std::vector<ContextExample> examples) {
  if (examples.empty()) throw EmptyPoolError("context pool has no examples");
  PoolIndex index;
  index.examples_ = std::move(examples);
  index.index_ids();

  std::vector<TokenSeq> docs;
  docs.reserve(index.examples_.size());
  for (const auto& ex : index.examples_) docs.push_back(tokenize(ex.query));
  index.stats_ = CorpusStats::fit(docs);

  index.features_.reserve(docs.size());
  for (const auto& doc : docs)
    index.features_.push_back(tfidf_vector(doc, index.stats_, EmptyDocPolicy::kZeroVector));

  index.query_only_ = false;
  for (const auto& ex : index.examples_)
    if (ex.query_only()) index.query_only_ = true;
  return index;
}

void PoolIndex::index_ids() {
  by_id_.clear();
  for (std::size_t i = 0; i < examples_.size(); ++i) {
    auto [it, inserted] = by_id_.emplace(examples_[i].id, i);
    if (!inserted)
      throw DuplicateIdError("duplicate example id \"" + examples_[i].id + "\"");
  }
}

std::optional<std::size_t> PoolIndex::position_of(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::size_t> PoolIndex::candidates(
    std::optional<std::string_view> exclude_id) const {
  std::optional<std::size_t> skip;
  if (exclude_id) skip = position_of(*exclude_id);
  std::vector<std::size_t> out;
  out.reserve(examples_.size());
  for (std::size_t i = 0; i < examples_.size(); ++i)
    if (!skip || i != *skip) out.push_back(i);
  return out;
}

std::filesystem::path PoolIndex::sidecar_path(const std::filesystem::path& pool_path) {
  std::filesystem::path p = pool_path;
  p.replace_extension(".features.json");
  return p;
}

void PoolIndex::persist(const std::filesystem::path& pool_path) const {
  {
    std::ofstream out(pool_path);
    if (!out) throw IoError("cannot write " + pool_path.string());
    for (const auto& ex : examples_) {
      json j;
      j["id"] = ex.id;
      j["query"] = ex.query;
      if (!ex.solution.empty()) j["solution"] = ex.solution;
      if (!ex.response.empty()) j["response"] = ex.response;
      out << j.dump() << '\n';
    }
    if (!out) throw IoError("failed writing " + pool_path.string());
  }

  json side;
  side["tokenizer_tag"] = std::string(kTokenizerTag);
  side["num_docs"] = stats_.num_docs();
  side["vocab"] = stats_.terms();
  side["doc_freq"] = stats_.doc_freqs();
  json feats = json::array();
  for (const auto& vec : features_) {
    json entries = json::array();
    for (const auto& [id, w] : vec.entries()) entries.push_back(json::array({id, w}));
    feats.push_back(std::move(entries));
  }
  side["features"] = std::move(feats);

  const auto side_path = sidecar_path(pool_path);
  std::ofstream out(side_path);
  if (!out) throw IoError("cannot write " + side_path.string());
  out << side.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + side_path.string());
}

PoolIndex PoolIndex::load(const std::filesystem::path& pool_path) {
  std::vector<ContextExample> examples = read_pool_jsonl(pool_path);
  if (examples.empty()) throw EmptyPoolError("context pool has no examples");

  const auto side_path = sidecar_path(pool_path);
  if (!std::filesystem::exists(side_path))
    throw IoError("missing feature sidecar " + side_path.string());
  json side = read_json_file(side_path);

  auto require = [&](const char* key) -> const json& {
    if (!side.contains(key))
      throw FormatError(side_path.string() + ": missing field \"" + key + "\"");
    return side[key];
  };

  const std::string tag = require("tokenizer_tag").get<std::string>();
  if (tag != kTokenizerTag)
    throw FormatError(side_path.string() + ": tokenizer tag \"" + tag +
                      "\" does not match \"" + std::string(kTokenizerTag) + "\"");

  const auto num_docs = require("num_docs").get<std::int64_t>();
  auto vocab = require("vocab").get<std::vector<std::string>>();
  auto doc_freq = require("doc_freq").get<std::vector<std::int64_t>>();
  if (vocab.size() != doc_freq.size())
    throw FormatError(side_path.string() + ": vocab and doc_freq sizes differ");

  PoolIndex index;
  index.examples_ = std::move(examples);
  index.index_ids();
  index.stats_ = CorpusStats::from_parts(std::move(vocab), std::move(doc_freq), num_docs);

  const json& feats = require("features");
  if (!feats.is_array() || feats.size() != index.examples_.size())
    throw FormatError(side_path.string() + ": features count does not match pool size");
  index.features_.reserve(feats.size());
  for (const auto& entries : feats) {
    std::vector<SparseVector::Entry> parsed;
    for (const auto& e : entries) {
      if (!e.is_array() || e.size() != 2)
        throw FormatError(side_path.string() + ": malformed feature entry");
      parsed.emplace_back(e[0].get<std::int32_t>(), e[1].get<double>());
    }
    index.features_.push_back(SparseVector::from_entries(std::move(parsed)));
  }

  index.query_only_ = false;
  for (const auto& ex : index.examples_)
    if (ex.query_only()) index.query_only_ = true;
  return index;
}

}  // namespace cgttrl
