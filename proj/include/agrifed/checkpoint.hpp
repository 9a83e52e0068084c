// Copyright 2026 The Agrifed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef AGRIFED_CHECKPOINT_HPP_
#define AGRIFED_CHECKPOINT_HPP_

#include <string>

#include "agrifed/tensor.hpp"

namespace agrifed {

// Versioned binary checkpoint: 8-byte magic "AFCKPT01", a header listing
// entry names, shapes and BN flags, then the values as little-endian 64-bit
// reals in row-major order. Round trips are bit-exact.
void save_checkpoint(const std::string& path, const ParameterSet& params);
ParameterSet load_checkpoint(const std::string& path);

// One-line human summary of a checkpoint (entry count, shapes, total size).
std::string describe_checkpoint(const std::string& path);

}  // namespace agrifed

#endif  // AGRIFED_CHECKPOINT_HPP_
