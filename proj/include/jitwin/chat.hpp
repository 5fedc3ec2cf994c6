#pragma once

#include <cstdlib>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "jitwin/error.hpp"

namespace jitwin {

/// A chat-completions compatible endpoint, e.g.
/// "https://api.example.com/v1/chat/completions".
struct ChatEndpoint {
  std::string url;
  std::string model;
  std::string api_key;
  int timeout_s = 60;

  /// Reads TWIN_LLM_ENDPOINT / TWIN_LLM_MODEL / TWIN_LLM_API_KEY.
  static std::optional<ChatEndpoint> from_env() {
    const char* url = std::getenv("TWIN_LLM_ENDPOINT");
    if (!url || !*url) return std::nullopt;
    ChatEndpoint ep;
    ep.url = url;
    if (const char* m = std::getenv("TWIN_LLM_MODEL")) ep.model = m;
    if (const char* k = std::getenv("TWIN_LLM_API_KEY")) ep.api_key = k;
    return ep;
  }
};

struct ChatMessage {
  std::string role;
  std::string content;
};

class ChatClient {
 public:
  explicit ChatClient(ChatEndpoint endpoint) : endpoint_(std::move(endpoint)) {
    static const std::regex kUrl(R"(^(https?)://([^/:\s]+)(:[0-9]{1,5})?(/[^\s]*)?$)");
    std::smatch m;
    if (!std::regex_match(endpoint_.url, m, kUrl)) {
      throw Error(ErrorCode::kProviderUnreachable, "malformed endpoint URL '" + endpoint_.url + "'");
    }
    base_ = m[1].str() + "://" + m[2].str() + m[3].str();
    path_ = m[4].matched ? m[4].str() : "/";
  }

  /// POSTs the message list and returns the first choice's content.
  std::string complete(const std::vector<ChatMessage>& messages) const {
    nlohmann::json body{{"model", endpoint_.model}, {"temperature", 0}};
    auto& msgs = body["messages"] = nlohmann::json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});

    httplib::Client cli(base_);
    cli.set_connection_timeout(endpoint_.timeout_s, 0);
    cli.set_read_timeout(endpoint_.timeout_s, 0);
    httplib::Headers headers;
    if (!endpoint_.api_key.empty()) headers.emplace("Authorization", "Bearer " + endpoint_.api_key);
    auto res = cli.Post(path_, headers, body.dump(), "application/json");
    if (!res) {
      throw Error(ErrorCode::kProviderUnreachable,
                  endpoint_.url + ": " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw Error(ErrorCode::kProviderUnreachable, endpoint_.url + ": HTTP " + std::to_string(res->status));
    }
    try {
      auto reply = nlohmann::json::parse(res->body);
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kProviderUnreachable, endpoint_.url + ": unexpected reply shape: " + e.what());
    }
  }

  const ChatEndpoint& endpoint() const { return endpoint_; }

 private:
  ChatEndpoint endpoint_;
  std::string base_;
  std::string path_;
};

/// Strips a ```json fence if the model wrapped its answer in one.
inline std::string strip_code_fence(std::string text) {
  auto open = text.find("```");
  if (open == std::string::npos) return text;
  auto line_end = text.find('\n', open);
  auto close = text.rfind("```");
  if (line_end == std::string::npos || close <= line_end) return text;
  return text.substr(line_end + 1, close - line_end - 1);
}

}  // namespace jitwin
