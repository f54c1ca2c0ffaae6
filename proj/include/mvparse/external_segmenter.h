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

#ifndef MVPARSE_EXTERNAL_SEGMENTER_H_
#define MVPARSE_EXTERNAL_SEGMENTER_H_

#include <mutex>
#include <string>

#include "mvparse/annotation.h"

namespace mvparse {

// Promptable segmenter living in a child process (e.g. a SAM wrapper). One JSON object per
// line on the child's stdin:
//   {"image_path": "...", "seeds": [[u, v], ...], "prior_mask_path": "..."}   (prior optional)
// and one line back on its stdout:
//   {"mask_path": "..."}                                                      (8-bit, nonzero = in)
// A reply may instead carry {"error": "..."}. Each request times out after `timeout_ms`.
// Calls are serialized; the child is started lazily and shut down on destruction.
class ExternalSegmenter : public PromptableSegmenter {
 public:
  explicit ExternalSegmenter(std::string command, int timeout_ms = 60000);
  ~ExternalSegmenter() override;
  ExternalSegmenter(const ExternalSegmenter&) = delete;
  ExternalSegmenter& operator=(const ExternalSegmenter&) = delete;

  SegmentResult segment(const RgbImage& image, const DepthMap& depth, std::span<const Seed> seeds,
                        const Mask* prior) override;

 private:
  void start();
  void stop();
  std::string request(const std::string& line);

  std::string command_;
  int timeout_ms_;
  std::mutex mu_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string pending_;
  std::string workdir_;
  unsigned long counter_ = 0;
};

}  // namespace mvparse

#endif  // MVPARSE_EXTERNAL_SEGMENTER_H_
