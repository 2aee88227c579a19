#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "acp/common.hpp"
#include "acp/rng.hpp"

namespace acp {

// One atomic claim: an uncertainty score (lower = more confident) and a
// binary correctness label from the ingested factuality oracle.
struct ClaimRecord {
  std::string text;
  double uncertainty = 0.0;
  int label = 0;  // 1 = factually correct

  bool operator==(const ClaimRecord&) const = default;
};

// One long-form generation: the prompt embedding plus its scored claims.
struct LongFormRecord {
  std::string id;
  std::string category;
  std::optional<std::string> prompt;
  std::vector<double> embedding;
  std::vector<ClaimRecord> claims;

  bool operator==(const LongFormRecord&) const = default;
};

// One multiple-choice question: class probabilities and the true class.
struct McqaRecord {
  std::string id;
  std::string category;
  std::optional<std::string> question;
  std::vector<double> embedding;
  std::vector<double> class_probs;
  std::size_t true_class = 0;

  bool operator==(const McqaRecord&) const = default;
};

// Three-way calibration/test split proportions plus the shuffle seed.
struct SplitSpec {
  std::array<double, 3> proportions{0.3, 0.4, 0.3};  // cal1, cal2, test
  std::uint64_t seed = 0;
};

struct PipelineConfig {
  double alpha = 0.2;
  double beta = 1.0;  // factuality threshold; binary labels fix it at 1
  TransformMode transform_mode = TransformMode::multiplicative;
  std::size_t pca_dim = 32;
  double tau_floor = 1e-3;
  std::uint64_t seed = 0;
};

inline void validate(const SplitSpec& spec) {
  double sum = 0.0;
  for (double p : spec.proportions) {
    if (!(p > 0.0)) throw ConfigError("split proportions must be positive");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ConfigError("split proportions must sum to 1");
}

inline void validate(const PipelineConfig& cfg) {
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0))
    throw ConfigError("alpha must lie in (0, 1)");
  if (cfg.beta != 1.0)
    throw ConfigError("beta must be 1 (labels are binary)");
  if (!(cfg.tau_floor > 0.0)) throw ConfigError("tau_floor must be positive");
  if (cfg.pca_dim < 1) throw ConfigError("pca_dim must be at least 1");
}

namespace detail {

inline std::string at_line(std::size_t line_no, const std::string& what) {
  return "line " + std::to_string(line_no) + ": " + what;
}

inline const nlohmann::json& require_field(const nlohmann::json& obj,
                                           const char* field,
                                           std::size_t line_no) {
  auto it = obj.find(field);
  if (it == obj.end())
    throw DataError(at_line(line_no, std::string("missing field \"") + field + "\""));
  return *it;
}

inline std::vector<double> parse_real_vector(const nlohmann::json& arr,
                                             const char* field,
                                             std::size_t line_no) {
  if (!arr.is_array())
    throw DataError(at_line(line_no, std::string("field \"") + field + "\" must be an array"));
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number())
      throw DataError(at_line(line_no, std::string("field \"") + field + "\" must contain numbers"));
    const double x = v.get<double>();
    if (!std::isfinite(x))
      throw DataError(at_line(line_no, std::string("field \"") + field + "\" must be finite"));
    out.push_back(x);
  }
  return out;
}

inline std::string string_field(const nlohmann::json& obj, const char* field,
                                std::size_t line_no) {
  const auto& v = require_field(obj, field, line_no);
  if (!v.is_string())
    throw DataError(at_line(line_no, std::string("field \"") + field + "\" must be a string"));
  return v.get<std::string>();
}

template <typename Record>
void check_common(Record& rec, const nlohmann::json& obj, std::size_t line_no,
                  std::unordered_set<std::string>& seen_ids,
                  std::size_t& embedding_dim) {
  rec.id = string_field(obj, "id", line_no);
  rec.category = string_field(obj, "category", line_no);
  rec.embedding = parse_real_vector(require_field(obj, "embedding", line_no),
                                    "embedding", line_no);
  if (rec.embedding.empty())
    throw DataError(at_line(line_no, "embedding is empty"));
  if (!seen_ids.insert(rec.id).second)
    throw DataError(at_line(line_no, "duplicate id \"" + rec.id + "\""));
  if (embedding_dim == 0) {
    embedding_dim = rec.embedding.size();
  } else if (rec.embedding.size() != embedding_dim) {
    throw DataError(at_line(line_no, "embedding dimension " +
                                         std::to_string(rec.embedding.size()) +
                                         " differs from previous records (" +
                                         std::to_string(embedding_dim) + ")"));
  }
}

}  // namespace detail

// Line-delimited JSON ingestion. Every invariant is checked up front so the
// pipeline can treat records as trusted afterwards.
inline std::vector<LongFormRecord> parse_longform_dataset(std::istream& in) {
  std::vector<LongFormRecord> records;
  std::unordered_set<std::string> seen_ids;
  std::size_t embedding_dim = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(detail::at_line(line_no, std::string("malformed JSON: ") + e.what()));
    }
    LongFormRecord rec;
    detail::check_common(rec, obj, line_no, seen_ids, embedding_dim);
    if (obj.contains("prompt")) rec.prompt = detail::string_field(obj, "prompt", line_no);

    const auto& claims = detail::require_field(obj, "claims", line_no);
    if (!claims.is_array() || claims.empty())
      throw DataError(detail::at_line(line_no, "field \"claims\" must be a non-empty array"));
    for (const auto& c : claims) {
      if (!c.is_object())
        throw DataError(detail::at_line(line_no, "claims entries must be objects"));
      ClaimRecord claim;
      claim.text = detail::string_field(c, "text", line_no);
      const auto& score = detail::require_field(c, "score", line_no);
      if (!score.is_number())
        throw DataError(detail::at_line(line_no, "claim field \"score\" must be a number"));
      claim.uncertainty = score.get<double>();
      if (!std::isfinite(claim.uncertainty))
        throw DataError(detail::at_line(line_no, "claim uncertainty must be finite"));
      if (claim.uncertainty < 0.0)
        throw DataError(detail::at_line(line_no, "claim uncertainty negative"));
      const auto& label = detail::require_field(c, "label", line_no);
      if (!label.is_number_integer() || (label.get<int>() != 0 && label.get<int>() != 1))
        throw DataError(detail::at_line(line_no,
                                        "claim field \"label\" must be 0 or 1 (binary labels only)"));
      claim.label = label.get<int>();
      rec.claims.push_back(std::move(claim));
    }
    records.push_back(std::move(rec));
  }
  return records;
}

inline std::vector<McqaRecord> parse_mcqa_dataset(std::istream& in) {
  std::vector<McqaRecord> records;
  std::unordered_set<std::string> seen_ids;
  std::size_t embedding_dim = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(detail::at_line(line_no, std::string("malformed JSON: ") + e.what()));
    }
    McqaRecord rec;
    detail::check_common(rec, obj, line_no, seen_ids, embedding_dim);
    if (obj.contains("question"))
      rec.question = detail::string_field(obj, "question", line_no);

    rec.class_probs = detail::parse_real_vector(
        detail::require_field(obj, "probs", line_no), "probs", line_no);
    if (rec.class_probs.empty())
      throw DataError(detail::at_line(line_no, "field \"probs\" is empty"));
    double sum = 0.0;
    for (double p : rec.class_probs) {
      if (p < 0.0)
        throw DataError(detail::at_line(line_no, "field \"probs\" has a negative entry"));
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw DataError(detail::at_line(line_no, "probabilities do not sum to 1"));

    const auto& answer = detail::require_field(obj, "answer", line_no);
    if (!answer.is_number_integer() || answer.get<long long>() < 0 ||
        static_cast<std::size_t>(answer.get<long long>()) >= rec.class_probs.size())
      throw DataError(detail::at_line(line_no, "field \"answer\" is not a valid class index"));
    rec.true_class = answer.get<std::size_t>();
    records.push_back(std::move(rec));
  }
  return records;
}

inline nlohmann::json to_json(const LongFormRecord& rec) {
  nlohmann::json obj;
  obj["id"] = rec.id;
  obj["category"] = rec.category;
  if (rec.prompt) obj["prompt"] = *rec.prompt;
  obj["embedding"] = rec.embedding;
  nlohmann::json claims = nlohmann::json::array();
  for (const auto& c : rec.claims)
    claims.push_back({{"text", c.text}, {"score", c.uncertainty}, {"label", c.label}});
  obj["claims"] = std::move(claims);
  return obj;
}

inline nlohmann::json to_json(const McqaRecord& rec) {
  nlohmann::json obj;
  obj["id"] = rec.id;
  obj["category"] = rec.category;
  if (rec.question) obj["question"] = *rec.question;
  obj["embedding"] = rec.embedding;
  obj["probs"] = rec.class_probs;
  obj["answer"] = rec.true_class;
  return obj;
}

template <typename Record>
void write_jsonl(std::ostream& out, const std::vector<Record>& records) {
  for (const auto& rec : records) out << to_json(rec).dump() << '\n';
}

template <typename Record>
struct SplitResult {
  std::vector<Record> cal1;
  std::vector<Record> cal2;
  std::vector<Record> test;
};

// Seeded three-way partition. cal1/cal2 sizes are floor(n * proportion);
// the remainder lands in test so calibration sizes stay deterministic.
// The 1e-9 nudge realizes the mathematical floor despite binary rounding
// of products like 100 * 0.3.
template <typename Record>
SplitResult<Record> split_dataset(const std::vector<Record>& records,
                                  const SplitSpec& spec) {
  validate(spec);
  const std::size_t n = records.size();
  if (n < 3) throw DataError("dataset has fewer than 3 records; cannot split");
  const auto n1 = static_cast<std::size_t>(
      std::floor(static_cast<double>(n) * spec.proportions[0] + 1e-9));
  const auto n2 = static_cast<std::size_t>(
      std::floor(static_cast<double>(n) * spec.proportions[1] + 1e-9));
  if (n1 == 0 || n2 == 0)
    throw DataError("split proportions leave cal1 or cal2 empty for n=" + std::to_string(n));

  Rng rng(spec.seed);
  const std::vector<std::size_t> order = shuffled_indices(n, rng);

  SplitResult<Record> out;
  out.cal1.reserve(n1);
  out.cal2.reserve(n2);
  out.test.reserve(n - n1 - n2);
  for (std::size_t i = 0; i < n; ++i) {
    const Record& rec = records[order[i]];
    if (i < n1)
      out.cal1.push_back(rec);
    else if (i < n1 + n2)
      out.cal2.push_back(rec);
    else
      out.test.push_back(rec);
  }
  return out;
}

}  // namespace acp
