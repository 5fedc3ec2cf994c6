#pragma once

#include <sys/wait.h>

#include <array>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "jitwin/mask.hpp"
#include "jitwin/perception.hpp"

namespace fixture {

namespace fs = std::filesystem;

/// Unique scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("jitwin_test_" + std::to_string(rd()) + "_" + std::to_string(counter.fetch_add(1)));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

/// Rectangle detection with consistent bbox, mask and centroid.
inline jitwin::Detection rect_detection(int det_id, const std::string& category, jitwin::Bbox r, int width,
                                        int height, std::optional<double> depth = 1.0,
                                        std::vector<double> embedding = {}) {
  jitwin::BinaryMask m(width, height);
  m.fill_rect(r.x, r.y, r.w, r.h);
  jitwin::Detection d;
  d.det_id = det_id;
  d.category = category;
  d.bbox = r;
  d.mask = jitwin::rle_encode(m);
  d.centroid = *jitwin::mask_centroid(m);
  d.depth_mean = depth;
  d.embedding = std::move(embedding);
  return d;
}

inline std::vector<double> unit(int dim, int axis) {
  std::vector<double> v(static_cast<std::size_t>(dim), 0.0);
  v[static_cast<std::size_t>(axis)] = 1.0;
  return v;
}

struct CliResult {
  int status = -1;
  std::string output;  // stdout and stderr interleaved
};

/// Runs the CLI binary through the shell, capturing combined output.
inline CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string(JITWIN_CLI_PATH) + " " + args + " 2>&1";
  CliResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int status = pclose(pipe);
  r.status = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

inline std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out.push_back(c);
  }
  return out + "'";
}

/// Local chat-completions stand-in. Replies are served from a queue (the last
/// one repeats); every request body is recorded.
class FakeChatServer {
 public:
  explicit FakeChatServer(std::vector<std::string> replies, int status = 200)
      : replies_(replies.begin(), replies.end()), status_(status) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mu_);
      requests_.push_back(nlohmann::json::parse(req.body));
      if (status_ != 200) {
        res.status = status_;
        return;
      }
      std::string content = replies_.empty() ? "" : replies_.front();
      if (replies_.size() > 1) replies_.pop_front();
      nlohmann::json body{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}};
      res.set_content(body.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    while (!server_.is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  ~FakeChatServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }
  std::vector<nlohmann::json> requests() {
    std::lock_guard lock(mu_);
    return requests_;
  }

 private:
  httplib::Server server_;
  std::thread thread_;
  std::mutex mu_;
  std::deque<std::string> replies_;
  std::vector<nlohmann::json> requests_;
  int status_;
  int port_ = 0;
};

}  // namespace fixture
