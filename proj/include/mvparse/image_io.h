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

#ifndef MVPARSE_IMAGE_IO_H_
#define MVPARSE_IMAGE_IO_H_

#include <string>

#include "mvparse/common.h"
#include "mvparse/geometry.h"

namespace mvparse {

// PNG helpers. Output is deterministic: no timestamps or text chunks are written.
void write_rgb_png(const std::string& path, const RgbImage& image);
RgbImage read_rgb_png(const std::string& path);

// 8-bit grayscale.
void write_gray8_png(const std::string& path, const Grid<uint8_t>& image);
Grid<uint8_t> read_gray8_png(const std::string& path);

// 16-bit grayscale.
void write_gray16_png(const std::string& path, const Grid<uint16_t>& image);
Grid<uint16_t> read_gray16_png(const std::string& path);

// Depth in meters <-> 16-bit millimeters (0 = invalid). Values beyond 65.535 m throw.
void write_depth_png(const std::string& path, const DepthMap& depth);
DepthMap read_depth_png(const std::string& path);

// Binary mask stored as 0/255.
void write_mask_png(const std::string& path, const Mask& mask);
Mask read_mask_png(const std::string& path);

}  // namespace mvparse

#endif  // MVPARSE_IMAGE_IO_H_
