// Copyright 2026 The sbx-forge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Runtime half of the fault-domain boundary: mask streams and the XOR
// write-back interceptor.
#ifndef SBXFORGE_INTERCEPTOR_H_
#define SBXFORGE_INTERCEPTOR_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sbxforge {

// Fuzzer input interpreted as a sequence of little-endian XOR masks, one per
// intercepted load, each as wide as the load. Reads past the end yield zero.
class MaskStream {
 public:
  MaskStream() = default;
  explicit MaskStream(std::vector<uint8_t> bytes) : bytes_(std::move(bytes)) {}

  // Consumes `width` bytes (1, 2, 4 or 8) and returns them as a mask.
  uint64_t NextMask(unsigned width);

  const std::vector<uint8_t>& bytes() const { return bytes_; }
  // Bytes consumed so far; may exceed bytes().size() (virtual zero tail).
  uint64_t cursor() const { return cursor_; }
  bool exhausted() const { return cursor_ >= bytes_.size(); }
  void Rewind() { cursor_ = 0; }
  void Reset(std::vector<uint8_t> bytes) {
    bytes_ = std::move(bytes);
    cursor_ = 0;
  }

 private:
  std::vector<uint8_t> bytes_;
  uint64_t cursor_ = 0;
};

struct InterceptionRecord {
  uint32_t site = 0;
  uint64_t address = 0;
  uint8_t width = 0;
  uint64_t original = 0;
  uint64_t mask = 0;
  uint64_t mutated = 0;
  uint64_t stream_offset = 0;

  friend bool operator==(const InterceptionRecord&, const InterceptionRecord&) = default;
};

// One line per record: "site addr width original mask mutated offset".
std::string FormatRecord(const InterceptionRecord& record);

// Called by the VM for every hooked load whose address lies in the cage,
// once faults are armed (after the fork point). `bytes` views the cage
// memory the load is about to read.
class LoadInterceptor {
 public:
  virtual ~LoadInterceptor() = default;
  virtual uint64_t Intercept(uint32_t site, uint64_t address, std::span<uint8_t> bytes) = 0;
  // Mask bytes consumed so far (0 for interceptors without a stream).
  virtual uint64_t consumed() const { return 0; }
};

// Forwards loads untouched; used by the corruption-API baseline.
class PassthroughInterceptor final : public LoadInterceptor {
 public:
  uint64_t Intercept(uint32_t site, uint64_t address, std::span<uint8_t> bytes) override;
  uint64_t calls() const { return calls_; }

 private:
  uint64_t calls_ = 0;
};

// Loads the value, XORs it with the next mask and stores it back, so the
// fault is visible to every later read of the same bytes.
class MaskInterceptor final : public LoadInterceptor {
 public:
  MaskInterceptor() = default;
  explicit MaskInterceptor(std::vector<uint8_t> mask_bytes) : stream_(std::move(mask_bytes)) {}

  uint64_t Intercept(uint32_t site, uint64_t address, std::span<uint8_t> bytes) override;
  uint64_t consumed() const override { return stream_.cursor(); }

  void Reset(std::vector<uint8_t> mask_bytes) {
    stream_.Reset(std::move(mask_bytes));
    if (log_) log_->clear();
  }
  MaskStream& stream() { return stream_; }
  // Appends a record for every interception when set.
  void set_log(std::vector<InterceptionRecord>* log) { log_ = log; }

 private:
  MaskStream stream_;
  std::vector<InterceptionRecord>* log_ = nullptr;
};

uint64_t ReadLittleEndian(std::span<const uint8_t> bytes);
void WriteLittleEndian(std::span<uint8_t> bytes, uint64_t value);
uint64_t WidthMask(unsigned width);

}  // namespace sbxforge

#endif  // SBXFORGE_INTERCEPTOR_H_
