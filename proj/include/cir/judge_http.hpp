#pragma once

#include <chrono>
#include <string>

#include "cir/refinement.hpp"

namespace cir {

struct HttpJudgeOptions {
  std::chrono::milliseconds timeout{30000};
  int retries = 2;
  std::chrono::milliseconds initial_backoff{500};  // doubled after each failed attempt
};

// Judge reached over HTTP. Each call POSTs JSON to the configured URL:
//   validate: {"task": "validate", "ref_id", "candidates": [...], "text"}
//             -> {"answer": int | null, "raw": "..."}
//   generate: {"task": "generate", "ref_id", "target_id", "text", "examples": [...]}
//             -> {"texts": [...], "raw": "..."}
// A raw reply starting with "I apologize" is a refusal. Transport failures and
// non-2xx replies are retried; once retries are exhausted JudgeError is thrown.
class HttpJudge : public JudgeClient {
 public:
  explicit HttpJudge(std::string url, HttpJudgeOptions options = {});

  JudgeAnswer validate(const std::string& ref_id, std::span<const std::string> candidates,
                       const std::string& text) override;
  std::vector<std::string> generate(const std::string& ref_id, const std::string& target_id,
                                    const std::string& old_text, std::span<const std::string> good_examples) override;

 private:
  std::string post(const std::string& body);

  std::string origin_;
  std::string path_;
  HttpJudgeOptions options_;
};

// Interprets a validate response body; exposed for tests.
JudgeAnswer parse_validate_reply(const std::string& body, std::size_t candidate_count);

}  // namespace cir
