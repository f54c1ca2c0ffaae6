// Copyright 2026 The mvparse Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mvparse/external_segmenter.h"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <filesystem>

#include "json.hpp"
#include "mvparse/image_io.h"

namespace mvparse {

namespace fs = std::filesystem;

ExternalSegmenter::ExternalSegmenter(std::string command, int timeout_ms)
    : command_(std::move(command)), timeout_ms_(timeout_ms) {
  if (command_.empty()) throw Error("external segmenter: empty command");
}

ExternalSegmenter::~ExternalSegmenter() {
  stop();
  if (!workdir_.empty()) {
    std::error_code ec;
    fs::remove_all(workdir_, ec);
  }
}

void ExternalSegmenter::start() {
  if (workdir_.empty()) {
    std::string tmpl = (fs::temp_directory_path() / "mvparse-seg-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw Error("external segmenter: cannot create work directory");
    workdir_ = tmpl;
  }
  int in_pipe[2], out_pipe[2];
  if (pipe(in_pipe) != 0) throw Error("external segmenter: pipe failed");
  if (pipe(out_pipe) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    throw Error("external segmenter: pipe failed");
  }
  const pid_t pid = fork();
  if (pid < 0) throw Error("external segmenter: fork failed");
  if (pid == 0) {
    setpgid(0, 0);  // own group, so a kill also reaches whatever the shell spawned
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  setpgid(pid, pid);
  close(in_pipe[0]);
  close(out_pipe[1]);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  fcntl(to_child_, F_SETFD, FD_CLOEXEC);
  fcntl(from_child_, F_SETFD, FD_CLOEXEC);
  pending_.clear();
}

void ExternalSegmenter::stop() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    // Closing stdin asks the child to exit; give it a moment before killing it.
    int status = 0;
    for (int i = 0; i < 50; ++i) {
      if (waitpid(pid_, &status, WNOHANG) == pid_) {
        pid_ = -1;
        return;
      }
      usleep(10000);
    }
    kill(-pid_, SIGKILL);
    kill(pid_, SIGKILL);
    waitpid(pid_, &status, 0);
    pid_ = -1;
  }
}

std::string ExternalSegmenter::request(const std::string& line) {
  if (pid_ < 0) start();
  // A dead child shows up as EPIPE; ignore SIGPIPE for the write.
  struct sigaction ign {}, old {};
  ign.sa_handler = SIG_IGN;
  sigaction(SIGPIPE, &ign, &old);
  const std::string msg = line + "\n";
  size_t off = 0;
  while (off < msg.size()) {
    const ssize_t n = write(to_child_, msg.data() + off, msg.size() - off);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      sigaction(SIGPIPE, &old, nullptr);
      stop();
      throw Error("external segmenter: child closed its input");
    }
    off += static_cast<size_t>(n);
  }
  sigaction(SIGPIPE, &old, nullptr);

  const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms_);
  while (true) {
    const auto nl = pending_.find('\n');
    if (nl != std::string::npos) {
      std::string reply = pending_.substr(0, nl);
      pending_.erase(0, nl + 1);
      return reply;
    }
    const auto left =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now()).count();
    if (left <= 0) {
      stop();
      throw Error("external segmenter: timed out after " + std::to_string(timeout_ms_) + " ms");
    }
    pollfd pfd{from_child_, POLLIN, 0};
    const int r = poll(&pfd, 1, static_cast<int>(left));
    if (r < 0 && errno == EINTR) continue;
    if (r < 0) throw Error("external segmenter: poll failed");
    if (r == 0) continue;
    char buf[4096];
    const ssize_t n = read(from_child_, buf, sizeof(buf));
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      stop();
      throw Error("external segmenter: child exited without replying");
    }
    pending_.append(buf, static_cast<size_t>(n));
  }
}

SegmentResult ExternalSegmenter::segment(const RgbImage& image, const DepthMap& /*depth*/, std::span<const Seed> seeds,
                                         const Mask* prior) {
  std::lock_guard<std::mutex> lock(mu_);
  if (pid_ < 0) start();
  const std::string stem = workdir_ + "/req" + std::to_string(counter_++);
  nlohmann::ordered_json req;
  req["image_path"] = stem + "_image.png";
  write_rgb_png(req["image_path"].get<std::string>(), image);
  nlohmann::ordered_json pts = nlohmann::ordered_json::array();
  for (const Seed& s : seeds) pts.push_back(nlohmann::ordered_json::array({s.x, s.y}));
  req["seeds"] = pts;
  if (prior) {
    req["prior_mask_path"] = stem + "_prior.png";
    write_mask_png(req["prior_mask_path"].get<std::string>(), *prior);
  }
  const std::string reply = request(req.dump());
  nlohmann::json rep;
  try {
    rep = nlohmann::json::parse(reply);
  } catch (const nlohmann::json::exception&) {
    throw Error("external segmenter: malformed reply: " + reply);
  }
  if (rep.contains("error")) throw Error("external segmenter: " + rep["error"].dump());
  if (!rep.contains("mask_path") || !rep["mask_path"].is_string()) throw Error("external segmenter: reply lacks mask_path");
  SegmentResult out;
  Grid<uint8_t> g = read_gray8_png(rep["mask_path"].get<std::string>());
  if (!g.same_shape(image)) throw Error("external segmenter: mask size does not match the image");
  for (auto& v : g.data) v = v ? 1 : 0;
  out.mask = std::move(g);
  return out;
}

}  // namespace mvparse
