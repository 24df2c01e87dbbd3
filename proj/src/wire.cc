// Copyright 2026 The fedcspack Authors. All Rights Reserved.
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
// =============================================================================

#include "fedcspack/wire.h"

#include <bit>
#include <cmath>
#include <string>

#include "fedcspack/errors.h"

namespace fedcspack {
namespace {

class Writer {
 public:
  explicit Writer(std::size_t reserve) { out_.reserve(reserve); }

  void Bytes(const char* s, std::size_t n) {
    out_.insert(out_.end(), s, s + n);
  }
  void U16(std::uint16_t v) {
    out_.push_back(static_cast<std::uint8_t>(v));
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  void U32(std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) {
      out_.push_back(static_cast<std::uint8_t>(v >> s));
    }
  }
  void F32(float v) { U32(std::bit_cast<std::uint32_t>(v)); }

  std::vector<std::uint8_t> Take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }

  void Need(std::size_t n) {
    if (remaining() < n) {
      throw DecodeError("truncated at offset " + std::to_string(pos_), pos_);
    }
  }
  bool Magic(const char (&magic)[5]) {
    Need(4);
    for (int k = 0; k < 4; ++k) {
      if (in_[pos_ + k] != static_cast<std::uint8_t>(magic[k])) return false;
    }
    pos_ += 4;
    return true;
  }
  std::uint16_t U16() {
    Need(2);
    const auto v = static_cast<std::uint16_t>(in_[pos_] | (in_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t U32() {
    Need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= std::uint32_t{in_[pos_ + k]} << (8 * k);
    pos_ += 4;
    return v;
  }
  float F32() { return std::bit_cast<float>(U32()); }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void ReadVersion(Reader& r) {
  const std::size_t at = r.offset();
  const std::uint16_t version = r.U16();
  if (version != kWireVersion) {
    throw DecodeError("unsupported version " + std::to_string(version) +
                          " at offset " + std::to_string(at),
                      at);
  }
}

void ExpectEnd(const Reader& r) {
  if (r.remaining() != 0) {
    throw DecodeError("trailing bytes at offset " + std::to_string(r.offset()),
                      r.offset());
  }
}

}  // namespace

std::size_t EncodedSize(const PackedUpdate& u) {
  std::size_t n = kUpdateHeaderBytes;
  for (const PackedEntry& e : u.entries) {
    n += kEntryHeaderBytes + 4 * e.payload.size();
  }
  return n;
}

std::vector<std::uint8_t> EncodeUpdate(const PackedUpdate& u) {
  Writer w(EncodedSize(u));
  w.Bytes("FCSP", 4);
  w.U16(kWireVersion);
  w.U32(u.client_id);
  w.U32(u.round);
  w.U32(u.pack);
  w.U32(static_cast<std::uint32_t>(u.entries.size()));
  for (const PackedEntry& e : u.entries) {
    w.U32(e.package_index);
    w.F32(e.theta);
    w.F32(e.beta);
    w.U32(static_cast<std::uint32_t>(e.payload.size()));
    for (float v : e.payload) w.F32(v);
  }
  return w.Take();
}

PackedUpdate DecodeUpdate(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (!r.Magic("FCSP")) throw DecodeError("bad magic at offset 0", 0);
  ReadVersion(r);
  PackedUpdate u;
  u.client_id = r.U32();
  u.round = r.U32();
  u.pack = r.U32();
  const std::uint32_t count = r.U32();
  // Each entry needs at least its header; reject absurd counts before
  // reserving.
  if (count > r.remaining() / kEntryHeaderBytes) {
    r.Need(static_cast<std::size_t>(count) * kEntryHeaderBytes);
  }
  u.entries.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::size_t at = r.offset();
    PackedEntry e;
    e.package_index = r.U32();
    e.theta = r.F32();
    e.beta = r.F32();
    const std::size_t len_at = r.offset();
    const std::uint32_t len = r.U32();
    if (!u.entries.empty() && e.package_index <= u.entries.back().package_index) {
      throw DecodeError("unsorted entries at offset " + std::to_string(at), at);
    }
    if (!(std::isfinite(e.theta) && e.theta >= -1.0f && e.theta <= 1.0f) ||
        !(std::isfinite(e.beta) && e.beta >= 0.0f)) {
      throw DecodeError("invalid weight terms at offset " + std::to_string(at),
                        at);
    }
    if (len == 0 || len > u.pack) {
      throw DecodeError("invalid payload length at offset " +
                            std::to_string(len_at),
                        len_at);
    }
    r.Need(4 * static_cast<std::size_t>(len));
    e.payload.resize(len);
    for (float& v : e.payload) v = r.F32();
    u.entries.push_back(std::move(e));
  }
  ExpectEnd(r);
  return u;
}

PackedUpdate MakePackedUpdate(int client_id, std::size_t round,
                              std::size_t pack,
                              const SimilarityProfile& profile,
                              const LocalMask& mask,
                              const DeltaPackages& payloads, WeightMode mode) {
  PackedUpdate u;
  u.client_id = static_cast<std::uint32_t>(client_id);
  u.round = static_cast<std::uint32_t>(round);
  u.pack = static_cast<std::uint32_t>(pack);
  for (std::size_t j : mask.selected) {
    const auto [theta, beta] = ReportedTerms(profile, j, mode);
    u.entries.push_back(PackedEntry{static_cast<std::uint32_t>(j),
                                    static_cast<float>(theta),
                                    static_cast<float>(beta), payloads.at(j)});
  }
  return u;
}

ClientUpdate Unpack(const PackedUpdate& u, std::size_t package_count) {
  ClientUpdate c;
  c.client_id = static_cast<int>(u.client_id);
  c.mask.weights.assign(package_count, 0.0);
  for (const PackedEntry& e : u.entries) {
    if (e.package_index >= package_count) {
      throw ProtocolViolation("package index " +
                                  std::to_string(e.package_index) +
                                  " out of range",
                              c.client_id);
    }
    c.mask.weights[e.package_index] = MaskWeight(e.theta, e.beta);
    c.mask.selected.push_back(e.package_index);
    c.payloads.emplace(e.package_index, e.payload);
  }
  return c;
}

std::vector<std::uint8_t> EncodeBroadcast(const Broadcast& b) {
  Writer w(kBroadcastHeaderBytes + 4 * (b.params.size() + b.mask_totals.size()));
  w.Bytes("FCSB", 4);
  w.U16(kWireVersion);
  w.U32(b.round);
  w.U32(static_cast<std::uint32_t>(b.params.size()));
  w.U32(static_cast<std::uint32_t>(b.mask_totals.size()));
  for (float v : b.params) w.F32(v);
  for (float v : b.mask_totals) w.F32(v);
  return w.Take();
}

Broadcast DecodeBroadcast(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (!r.Magic("FCSB")) throw DecodeError("bad magic at offset 0", 0);
  ReadVersion(r);
  Broadcast b;
  b.round = r.U32();
  const std::size_t n_params = r.U32();
  const std::size_t n_mask = r.U32();
  r.Need(4 * (n_params + n_mask));
  b.params.resize(n_params);
  for (float& v : b.params) v = r.F32();
  b.mask_totals.resize(n_mask);
  for (float& v : b.mask_totals) v = r.F32();
  ExpectEnd(r);
  return b;
}

}  // namespace fedcspack
