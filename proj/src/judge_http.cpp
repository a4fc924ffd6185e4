#include "cir/judge_http.hpp"

#include <thread>

#include "cir/error.hpp"
#include "httplib.h"
#include "json.hpp"

namespace cir {

HttpJudge::HttpJudge(std::string url, HttpJudgeOptions options) : options_(options) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos || url.compare(0, scheme, "http") != 0) {
    throw Error(ErrorKind::InvalidArgument, "judge url must start with http://");
  }
  const auto slash = url.find('/', scheme + 3);
  origin_ = url.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : url.substr(slash);
}

std::string HttpJudge::post(const std::string& body) {
  httplib::Client client(origin_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  auto backoff = options_.initial_backoff;
  std::string last_error;
  for (int attempt = 0; attempt <= options_.retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    auto res = client.Post(path_, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 200 && res->status < 300) return res->body;
    last_error = "HTTP " + std::to_string(res->status);
  }
  throw Error(ErrorKind::JudgeError, "judge at " + origin_ + path_ + " failed: " + last_error);
}

JudgeAnswer parse_validate_reply(const std::string& body, std::size_t candidate_count) {
  const auto doc = nlohmann::json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw Error(ErrorKind::JudgeError, "judge reply is not a JSON object");
  const std::string raw = doc.contains("raw") && doc["raw"].is_string() ? doc["raw"].get<std::string>() : "";
  if (raw.rfind("I apologize", 0) == 0) return JudgeAnswer::refusal(raw);
  if (!doc.contains("answer") || !doc["answer"].is_number_integer()) {
    throw Error(ErrorKind::JudgeError, "judge reply has no integer answer");
  }
  const int answer = doc["answer"].get<int>();
  if (answer < 0 || static_cast<std::size_t>(answer) >= candidate_count) return JudgeAnswer::minus_one(raw);
  return JudgeAnswer::pick(answer, raw);
}

JudgeAnswer HttpJudge::validate(const std::string& ref_id, std::span<const std::string> candidates,
                                const std::string& text) {
  const nlohmann::json req{{"task", "validate"},
                           {"ref_id", ref_id},
                           {"candidates", std::vector<std::string>(candidates.begin(), candidates.end())},
                           {"text", text}};
  return parse_validate_reply(post(req.dump()), candidates.size());
}

std::vector<std::string> HttpJudge::generate(const std::string& ref_id, const std::string& target_id,
                                             const std::string& old_text, std::span<const std::string> good_examples) {
  const nlohmann::json req{{"task", "generate"},
                           {"ref_id", ref_id},
                           {"target_id", target_id},
                           {"text", old_text},
                           {"examples", std::vector<std::string>(good_examples.begin(), good_examples.end())}};
  const auto doc = nlohmann::json::parse(post(req.dump()), nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("texts") || !doc["texts"].is_array()) {
    throw Error(ErrorKind::JudgeError, "generate reply has no texts list");
  }
  std::vector<std::string> texts;
  for (const auto& t : doc["texts"]) {
    if (!t.is_string()) throw Error(ErrorKind::JudgeError, "generate reply contains a non-string text");
    texts.push_back(t.get<std::string>());
  }
  return texts;
}

}  // namespace cir
