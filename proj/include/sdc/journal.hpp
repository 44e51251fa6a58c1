// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sdc/error.hpp"
#include "sdc/io.hpp"
#include "sdc/sha256.hpp"
#include "sdc/types.hpp"

namespace sdc {

enum class EventKind {
  Mint,
  Transfer,
  Approval,
  Burn,
  Lock,
  Release,
  StateTransition,
  Valuation,
  Settlement,
  Termination,
  Rejection,
  Notification,
};

constexpr std::string_view to_string(EventKind k) noexcept {
  switch (k) {
    case EventKind::Mint: return "Mint";
    case EventKind::Transfer: return "Transfer";
    case EventKind::Approval: return "Approval";
    case EventKind::Burn: return "Burn";
    case EventKind::Lock: return "Lock";
    case EventKind::Release: return "Release";
    case EventKind::StateTransition: return "StateTransition";
    case EventKind::Valuation: return "Valuation";
    case EventKind::Settlement: return "Settlement";
    case EventKind::Termination: return "Termination";
    case EventKind::Rejection: return "Rejection";
    case EventKind::Notification: return "Notification";
  }
  return "?";
}

inline std::optional<EventKind> event_kind_from_string(std::string_view s) {
  for (int i = 0; i <= static_cast<int>(EventKind::Notification); ++i) {
    auto k = static_cast<EventKind>(i);
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

inline constexpr std::string_view kSystemActor = "SYSTEM";

/// One journaled fact. `details` is a std::map so its iteration order (and
/// therefore the serialized form) is canonical.
struct EventRecord {
  Tick timestamp = 0;
  EventKind kind = EventKind::Transfer;
  std::string actor{kSystemActor};
  std::map<std::string, std::string> details;

  friend bool operator==(const EventRecord&, const EventRecord&) = default;

  const std::string& at(const std::string& key) const {
    auto it = details.find(key);
    if (it == details.end())
      throw Error(Errc::CorruptJournal, "record has no field " + key);
    return it->second;
  }
  std::string get(const std::string& key, std::string fallback = {}) const {
    auto it = details.find(key);
    return it == details.end() ? fallback : it->second;
  }
};

namespace wire {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

inline void put_str(std::vector<std::uint8_t>& out, std::string_view s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

/// Bounds-checked big-endian reader; any overrun is a CorruptJournal.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  bool done() const noexcept { return pos_ == bytes_.size(); }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

  std::span<const std::uint8_t> take(std::size_t n) {
    if (n > remaining())
      throw Error(Errc::CorruptJournal, "truncated at offset " + std::to_string(pos_));
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (auto b : take(4)) v = (v << 8) | b;
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (auto b : take(8)) v = (v << 8) | b;
    return v;
  }
  std::string str() {
    auto s = take(u32());
    return {s.begin(), s.end()};
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace wire

/// Canonical payload layout:
///   timestamp (i64 BE) | kind | actor | detail count (u32 BE) | (key | value)*
/// where every string is a u32 BE length followed by its UTF-8 bytes.
inline std::vector<std::uint8_t> serialize(const EventRecord& rec) {
  std::vector<std::uint8_t> out;
  wire::put_u64(out, static_cast<std::uint64_t>(rec.timestamp));
  wire::put_str(out, to_string(rec.kind));
  wire::put_str(out, rec.actor);
  wire::put_u32(out, static_cast<std::uint32_t>(rec.details.size()));
  for (const auto& [k, v] : rec.details) {
    wire::put_str(out, k);
    wire::put_str(out, v);
  }
  return out;
}

inline EventRecord deserialize(std::span<const std::uint8_t> payload) {
  wire::Reader r(payload);
  EventRecord rec;
  rec.timestamp = static_cast<Tick>(r.u64());
  auto kind = event_kind_from_string(r.str());
  if (!kind) throw Error(Errc::CorruptJournal, "unknown event kind");
  rec.kind = *kind;
  rec.actor = r.str();
  auto n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    auto k = r.str();
    auto v = r.str();
    if (!rec.details.empty() && rec.details.rbegin()->first >= k)
      throw Error(Errc::CorruptJournal, "detail keys out of canonical order");
    rec.details.emplace(std::move(k), std::move(v));
  }
  if (!r.done()) throw Error(Errc::CorruptJournal, "trailing bytes in payload");
  return rec;
}

struct JournalBlock {
  std::uint64_t index = 0;
  Digest prev_hash{};
  std::vector<std::uint8_t> payload;
  Digest hash{};

  friend bool operator==(const JournalBlock&, const JournalBlock&) = default;
};

/// H(index BE8 | prev_hash | payload).
inline Digest block_hash(std::uint64_t index, const Digest& prev,
                         std::span<const std::uint8_t> payload) {
  std::vector<std::uint8_t> idx;
  wire::put_u64(idx, index);
  return Sha256().update(idx).update(prev).update(payload).finish();
}

/// True iff indices run 0..n-1, every block links to its predecessor (block 0
/// to the all-zero digest) and every stored hash recomputes.
inline bool verify(std::span<const JournalBlock> blocks) {
  Digest prev{};
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    if (b.index != i || b.prev_hash != prev) return false;
    if (block_hash(b.index, b.prev_hash, b.payload) != b.hash) return false;
    prev = b.hash;
  }
  return true;
}

/// Append-only hash chain. Single writer; a const Journal is safe to read
/// from several threads.
class Journal {
 public:
  Journal() = default;

  const JournalBlock& append(const EventRecord& rec) {
    JournalBlock b;
    b.index = blocks_.size();
    b.prev_hash = head_hash();
    b.payload = serialize(rec);
    b.hash = block_hash(b.index, b.prev_hash, b.payload);
    blocks_.push_back(std::move(b));
    return blocks_.back();
  }

  std::span<const JournalBlock> blocks() const noexcept { return blocks_; }
  std::size_t size() const noexcept { return blocks_.size(); }
  bool empty() const noexcept { return blocks_.empty(); }

  /// Hash of the last block, or the all-zero digest for an empty journal.
  Digest head_hash() const noexcept {
    return blocks_.empty() ? Digest{} : blocks_.back().hash;
  }

  EventRecord record(std::size_t i) const { return deserialize(blocks_.at(i).payload); }

  std::vector<EventRecord> records() const {
    std::vector<EventRecord> out;
    out.reserve(blocks_.size());
    for (const auto& b : blocks_) out.push_back(deserialize(b.payload));
    return out;
  }

  /// Adopts blocks without checking them; callers decide whether to verify.
  static Journal from_blocks(std::vector<JournalBlock> blocks) {
    Journal j;
    j.blocks_ = std::move(blocks);
    return j;
  }

 private:
  std::vector<JournalBlock> blocks_;
};

inline bool verify(const Journal& j) { return verify(j.blocks()); }

/// File layout per block:
///   index (8 BE) | prev_hash (32) | payload_len (4 BE) | payload | hash (32)
inline std::vector<std::uint8_t> encode_journal(std::span<const JournalBlock> blocks) {
  std::vector<std::uint8_t> out;
  for (const auto& b : blocks) {
    wire::put_u64(out, b.index);
    out.insert(out.end(), b.prev_hash.begin(), b.prev_hash.end());
    wire::put_u32(out, static_cast<std::uint32_t>(b.payload.size()));
    out.insert(out.end(), b.payload.begin(), b.payload.end());
    out.insert(out.end(), b.hash.begin(), b.hash.end());
  }
  return out;
}

inline Journal decode_journal(std::span<const std::uint8_t> bytes) {
  wire::Reader r(bytes);
  std::vector<JournalBlock> blocks;
  while (!r.done()) {
    JournalBlock b;
    b.index = r.u64();
    auto prev = r.take(32);
    std::copy(prev.begin(), prev.end(), b.prev_hash.begin());
    auto payload = r.take(r.u32());
    b.payload.assign(payload.begin(), payload.end());
    auto h = r.take(32);
    std::copy(h.begin(), h.end(), b.hash.begin());
    blocks.push_back(std::move(b));
  }
  auto j = Journal::from_blocks(std::move(blocks));
  if (!verify(j)) throw Error(Errc::CorruptJournal, "hash chain does not verify");
  return j;
}

inline void export_journal(const Journal& j, const std::filesystem::path& path) {
  io::write_atomic(path, std::span<const std::uint8_t>(encode_journal(j.blocks())));
}

inline Journal import_journal(const std::filesystem::path& path) {
  return decode_journal(io::read_bytes(path));
}

}  // namespace sdc
