// Copyright 2026 The Gauntlet Authors
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

#include "gauntlet/zip.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>

#include "gauntlet/error.hpp"

namespace gauntlet::zip {

namespace {

constexpr std::uint32_t kLocalHeaderSig = 0x04034b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kEndSig = 0x06054b50;
constexpr std::size_t kEndRecordSize = 22;

[[noreturn]] void malformed(const std::string& why) {
  throw Error(ErrorCode::kMalformedArchive, "malformed archive: " + why);
}

class Cursor {
 public:
  Cursor(std::string_view bytes, std::size_t pos) : bytes_(bytes), pos_(pos) {}

  std::uint16_t u16() {
    need(2);
    auto b = reinterpret_cast<const unsigned char*>(bytes_.data() + pos_);
    pos_ += 2;
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
  std::uint32_t u32() {
    need(4);
    auto b = reinterpret_cast<const unsigned char*>(bytes_.data() + pos_);
    pos_ += 4;
    return static_cast<std::uint32_t>(b[0]) |
           (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
  }
  std::string_view take(std::size_t n) {
    need(n);
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }

 private:
  void need(std::size_t n) const {
    if (pos_ > bytes_.size() || bytes_.size() - pos_ < n) malformed("truncated");
  }
  std::string_view bytes_;
  std::size_t pos_;
};

void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t crc_of(std::string_view data) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t off = 0;
  while (off < data.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(data.size() - off, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data.data() + off), chunk);
    off += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::string inflate_raw(std::string_view in, std::uint64_t expected,
                        std::uint64_t limit) {
  if (expected > limit) {
    throw Error(ErrorCode::kPayloadTooLarge, "archive member exceeds size limit");
  }
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) malformed("inflate init");
  std::string out;
  out.resize(static_cast<std::size_t>(expected));
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(in.data()));
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  int rc = Z_OK;
  char spill[1];
  while (rc == Z_OK) {
    rc = inflate(&zs, Z_FINISH);
    if (rc == Z_BUF_ERROR && zs.avail_out == 0) {
      // More output than the header declared: probe one byte to tell a
      // lying header apart from a clean end of stream.
      zs.next_out = reinterpret_cast<Bytef*>(spill);
      zs.avail_out = 1;
      rc = inflate(&zs, Z_FINISH);
      inflateEnd(&zs);
      if (rc == Z_STREAM_END && zs.avail_out == 1) return out;
      malformed("member larger than declared size");
    }
  }
  const bool ok = rc == Z_STREAM_END && zs.total_out == expected;
  inflateEnd(&zs);
  if (!ok) malformed("corrupt deflate stream");
  return out;
}

std::string deflate_raw(std::string_view in) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, -MAX_WBITS, 8,
                   Z_DEFAULT_STRATEGY) != Z_OK) {
    throw Error(ErrorCode::kInternal, "deflate init failed");
  }
  std::string out;
  out.resize(deflateBound(&zs, static_cast<uLong>(in.size())));
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(in.data()));
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  out.resize(zs.total_out);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error(ErrorCode::kInternal, "deflate failed");
  return out;
}

}  // namespace

bool is_safe_member_name(std::string_view name) {
  if (name.empty()) return false;
  if (name.front() == '/') return false;
  if (name.find('\\') != std::string_view::npos) return false;
  if (name.find('\0') != std::string_view::npos) return false;
  if (name.size() >= 2 && name[1] == ':') return false;
  std::size_t start = 0;
  while (start <= name.size()) {
    const auto end = std::min(name.find('/', start), name.size());
    if (name.substr(start, end - start) == "..") return false;
    start = end + 1;
  }
  return true;
}

std::vector<Member> read_archive(std::string_view bytes,
                                 const ReadLimits& limits) {
  if (bytes.size() < kEndRecordSize) malformed("too short to be a zip");
  // The end-of-central-directory record sits in the last 64 KiB + 22 bytes.
  const std::size_t floor =
      bytes.size() > kEndRecordSize + 0xffff ? bytes.size() - kEndRecordSize - 0xffff : 0;
  std::size_t eocd = std::string_view::npos;
  for (std::size_t i = bytes.size() - kEndRecordSize + 1; i-- > floor;) {
    if (Cursor(bytes, i).u32() == kEndSig) {
      eocd = i;
      break;
    }
  }
  if (eocd == std::string_view::npos) malformed("no end of central directory");

  Cursor end(bytes, eocd + 4);
  const auto disk = end.u16();
  const auto cd_disk = end.u16();
  end.u16();
  const auto total_entries = end.u16();
  const auto cd_size = end.u32();
  const auto cd_offset = end.u32();
  if (disk != 0 || cd_disk != 0) malformed("multi-disk archives unsupported");
  if (cd_offset == 0xffffffffu || total_entries == 0xffff) {
    malformed("zip64 archives unsupported");
  }
  if (static_cast<std::uint64_t>(cd_offset) + cd_size > eocd) {
    malformed("central directory out of range");
  }

  std::vector<Member> members;
  std::uint64_t total = 0;
  Cursor cd(bytes, cd_offset);
  for (unsigned i = 0; i < total_entries; ++i) {
    if (cd.u32() != kCentralSig) malformed("bad central directory entry");
    const auto made_by = cd.u16();
    cd.u16();  // version needed
    const auto flags = cd.u16();
    const auto method = cd.u16();
    cd.u32();  // dos time + date
    const auto crc = cd.u32();
    const auto csize = cd.u32();
    const auto usize = cd.u32();
    const auto name_len = cd.u16();
    const auto extra_len = cd.u16();
    const auto comment_len = cd.u16();
    cd.u16();  // disk start
    cd.u16();  // internal attrs
    const auto ext_attr = cd.u32();
    const auto local_offset = cd.u32();
    std::string name(cd.take(name_len));
    cd.skip(extra_len);
    cd.skip(comment_len);

    if (!is_safe_member_name(name)) {
      throw Error(ErrorCode::kUnsafePath, "unsafe archive member path: " + name,
                  {{"member", name}});
    }
    if (flags & 0x1) malformed("encrypted members unsupported");
    if (name.back() == '/') continue;
    if (usize > limits.max_member_bytes) {
      throw Error(ErrorCode::kPayloadTooLarge,
                  "archive member exceeds size limit: " + name);
    }
    total += usize;
    if (total > limits.max_total_bytes) {
      throw Error(ErrorCode::kPayloadTooLarge, "archive exceeds total size limit");
    }

    Cursor local(bytes, local_offset);
    if (local.u32() != kLocalHeaderSig) malformed("bad local header for " + name);
    local.skip(22);
    const auto lname = local.u16();
    const auto lextra = local.u16();
    local.skip(lname);
    local.skip(lextra);
    const auto payload = local.take(csize);

    Member m;
    m.name = std::move(name);
    if (method == 0) {
      if (csize != usize) malformed("stored member size mismatch");
      m.data.assign(payload);
    } else if (method == 8) {
      m.data = inflate_raw(payload, usize, limits.max_member_bytes);
    } else {
      malformed("unsupported compression method " + std::to_string(method));
    }
    if (crc_of(m.data) != crc) malformed("crc mismatch for " + m.name);
    // Unix permission bits live in the high half of the external attributes
    // when the archive was made on a unix host.
    if ((made_by >> 8) == 3 && (ext_attr >> 16) != 0) {
      m.mode = (ext_attr >> 16) & 07777;
    }
    members.push_back(std::move(m));
  }
  return members;
}

void Writer::add(std::string name, std::string data, std::uint32_t mode,
                 bool compress) {
  members_.push_back(Member{std::move(name), std::move(data), mode});
  compress_.push_back(compress);
}

std::string Writer::finish() const {
  std::string out;
  std::string central;
  for (std::size_t i = 0; i < members_.size(); ++i) {
    const auto& m = members_[i];
    const std::uint32_t crc = crc_of(m.data);
    std::string body = compress_[i] ? deflate_raw(m.data) : m.data;
    std::uint16_t method = compress_[i] ? 8 : 0;
    if (compress_[i] && body.size() >= m.data.size()) {
      body = m.data;
      method = 0;
    }
    const auto offset = static_cast<std::uint32_t>(out.size());
    const auto name_len = static_cast<std::uint16_t>(m.name.size());

    put32(out, kLocalHeaderSig);
    put16(out, 20);
    put16(out, 0x0800);  // utf-8 names
    put16(out, method);
    put16(out, 0);
    put16(out, 0x21);  // 1980-01-01
    put32(out, crc);
    put32(out, static_cast<std::uint32_t>(body.size()));
    put32(out, static_cast<std::uint32_t>(m.data.size()));
    put16(out, name_len);
    put16(out, 0);
    out += m.name;
    out += body;

    put32(central, kCentralSig);
    put16(central, (3 << 8) | 20);
    put16(central, 20);
    put16(central, 0x0800);
    put16(central, method);
    put16(central, 0);
    put16(central, 0x21);
    put32(central, crc);
    put32(central, static_cast<std::uint32_t>(body.size()));
    put32(central, static_cast<std::uint32_t>(m.data.size()));
    put16(central, name_len);
    put16(central, 0);
    put16(central, 0);
    put16(central, 0);
    put16(central, 0);
    put32(central, (0100000u | (m.mode & 07777)) << 16);
    put32(central, offset);
    central += m.name;
  }
  const auto cd_offset = static_cast<std::uint32_t>(out.size());
  out += central;
  put32(out, kEndSig);
  put16(out, 0);
  put16(out, 0);
  put16(out, static_cast<std::uint16_t>(members_.size()));
  put16(out, static_cast<std::uint16_t>(members_.size()));
  put32(out, static_cast<std::uint32_t>(central.size()));
  put32(out, cd_offset);
  put16(out, 0);
  return out;
}

}  // namespace gauntlet::zip
