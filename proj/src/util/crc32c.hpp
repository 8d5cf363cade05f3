/*
 * crc32c.hpp
 *
 * This source file is part of the cachefs project
 *
 * Copyright 2026 cachefs project authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <cstdint>

namespace cfs {

// CRC-32C (Castagnoli), table driven. Matches the usual iSCSI polynomial
// 0x1EDC6F41, reflected, init and final xor 0xFFFFFFFF.
uint32_t crc32c(const uint8_t* data, size_t n, uint32_t seed = 0);

}  // namespace cfs
