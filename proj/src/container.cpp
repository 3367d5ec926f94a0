// Copyright 2026 The icefuse Authors. All Rights Reserved.
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
#include <bit>
#include <cstring>

#include "icefuse/error.hpp"
#include "icefuse/io.hpp"

namespace icefuse {

namespace {

constexpr char kMagic[8] = {'I', 'C', 'E', 'F', 'U', 'S', 'E', '\0'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

std::uint64_t get_u64(const char* p) {
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[b])) << (8 * b);
  return v;
}

void put_f64(std::string& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }

double get_f64(const char* p) { return std::bit_cast<double>(get_u64(p)); }

std::string digest(const std::string& bytes) {
  return sha256_hex({reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()});
}

}  // namespace

const Tensor& Container::block(const std::string& name) const {
  for (const auto& b : blocks)
    if (b.name == name) return b.tensor;
  fail(ErrorKind::kIntegrity, "missing block '" + name + "'");
}

std::string encode_container(const Container& c) {
  std::string payload;
  Json table = Json::array();
  for (const auto& b : c.blocks) {
    table.push_back({{"name", b.name}, {"shape", b.tensor.shape()}, {"offset", payload.size()}, {"count", b.tensor.size()}});
    for (double v : b.tensor.values()) put_f64(payload, v);
  }
  Json header = c.header;
  if (!header.contains("format_version")) header["format_version"] = kContainerFormatVersion;
  header["blocks"] = table;
  header["payload_bytes"] = payload.size();
  header["payload_sha256"] = digest(payload);
  const std::string text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  put_u64(out, text.size());
  out += text;
  out += payload;
  return out;
}

void write_container(const std::filesystem::path& path, const Container& c) {
  const std::string bytes = encode_container(c);
  write_file_atomic(path, {bytes.data(), bytes.size()});
}

Container read_container(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const std::string where = " in '" + path.filename().string() + "'";
  require(bytes.size() >= 16 && std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) == 0, ErrorKind::kIntegrity,
          "not an icefuse container" + where);
  const std::uint64_t header_len = get_u64(bytes.data() + 8);
  require(header_len <= bytes.size() - 16, ErrorKind::kIntegrity, "truncated header" + where);

  Container c;
  try {
    c.header = Json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const Json::exception& e) {
    fail(ErrorKind::kIntegrity, std::string("corrupted header") + where + ": " + e.what());
  }
  try {
    const std::string payload = bytes.substr(16 + header_len);
    const auto expected = c.header.at("payload_bytes").get<std::uint64_t>();
    require(payload.size() == expected, ErrorKind::kIntegrity,
            "payload is " + std::to_string(payload.size()) + " bytes, header declares " + std::to_string(expected) +
                where);
    require(digest(payload) == c.header.at("payload_sha256").get<std::string>(), ErrorKind::kIntegrity,
            "payload digest mismatch" + where);
    for (const auto& b : c.header.at("blocks")) {
      const auto shape = b.at("shape").get<Shape>();
      const auto offset = b.at("offset").get<std::uint64_t>();
      const auto count = b.at("count").get<std::uint64_t>();
      require(count == shape_size(shape) && offset % 8 == 0 && offset + 8 * count <= payload.size(),
              ErrorKind::kIntegrity, "block '" + b.at("name").get<std::string>() + "' is out of range" + where);
      std::vector<double> values(count);
      for (std::uint64_t i = 0; i < count; ++i) values[i] = get_f64(payload.data() + offset + 8 * i);
      c.blocks.push_back({b.at("name").get<std::string>(), Tensor(shape, std::move(values))});
    }
  } catch (const Json::exception& e) {
    fail(ErrorKind::kIntegrity, std::string("malformed header") + where + ": " + e.what());
  }
  return c;
}

void require_version(const Json& header, const std::string& schema) {
  require(header.value("schema", std::string()) == schema, ErrorKind::kData,
          "expected a " + schema + " file, found '" + header.value("schema", std::string("?")) + "'");
  const int version = header.value("format_version", -1);
  require(version == kContainerFormatVersion, ErrorKind::kUnsupportedVersion,
          "unsupported " + schema + " format version " + std::to_string(version) + " (this build reads version " +
              std::to_string(kContainerFormatVersion) + ")");
}

}  // namespace icefuse
