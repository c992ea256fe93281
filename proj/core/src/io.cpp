// Copyright 2026 The C3 Authors
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

#include "c3/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace c3::io {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
}

fs::path with_suffix(const fs::path& stem, const char* suffix) {
  return fs::path(stem.string() + suffix);
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(std::numeric_limits<double>::max_digits10);
  os << v;
  return os.str();
}

double parse_double(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(std::string("malformed ") + what + ": '" + s + "'");
  }
}

}  // namespace

void write_tensor(const fs::path& stem, const Tensor<float>& t, const std::string& role,
                  const std::map<std::string, std::string>& attributes) {
  if (stem.has_parent_path()) fs::create_directories(stem.parent_path());
  {
    std::ofstream hdr(with_suffix(stem, ".hdr"));
    if (!hdr) throw std::runtime_error("cannot write " + with_suffix(stem, ".hdr").string());
    hdr << "c3-tensor 1\n";
    hdr << "dtype float32\n";
    hdr << "shape";
    for (Index d : t.shape()) hdr << ' ' << d;
    hdr << "\nrole " << role << "\n";
    for (const auto& [k, v] : attributes) {
      if (k.find_first_of(" \n") != std::string::npos || v.find('\n') != std::string::npos) {
        throw std::invalid_argument("tensor attribute '" + k + "' cannot be stored");
      }
      hdr << "attr." << k << ' ' << v << "\n";
    }
  }
  std::ofstream data(with_suffix(stem, ".f32"), std::ios::binary);
  if (!data) throw std::runtime_error("cannot write " + with_suffix(stem, ".f32").string());
  std::vector<std::uint32_t> words(static_cast<std::size_t>(t.size()));
  for (Index i = 0; i < t.size(); ++i) words[static_cast<std::size_t>(i)] = to_little(std::bit_cast<std::uint32_t>(t[i]));
  data.write(reinterpret_cast<const char*>(words.data()),
             static_cast<std::streamsize>(words.size() * sizeof(std::uint32_t)));
  if (!data) throw std::runtime_error("short write to " + with_suffix(stem, ".f32").string());
}

TensorFile read_tensor(const fs::path& stem) {
  std::ifstream hdr(with_suffix(stem, ".hdr"));
  if (!hdr) throw std::runtime_error("missing tensor header " + with_suffix(stem, ".hdr").string());
  TensorFile out;
  Shape shape;
  bool have_magic = false, have_shape = false;
  std::string line;
  while (std::getline(hdr, line)) {
    if (line.empty()) continue;
    const auto sp = line.find(' ');
    const std::string key = line.substr(0, sp);
    const std::string rest = sp == std::string::npos ? "" : line.substr(sp + 1);
    if (key == "c3-tensor") {
      if (rest != "1") throw std::runtime_error("unsupported tensor format version " + rest);
      have_magic = true;
    } else if (key == "dtype") {
      if (rest != "float32") throw std::runtime_error("unsupported dtype " + rest);
    } else if (key == "shape") {
      std::istringstream is(rest);
      Index d;
      while (is >> d) shape.push_back(d);
      have_shape = true;
    } else if (key == "role") {
      out.role = rest;
    } else if (key.rfind("attr.", 0) == 0) {
      out.attributes[key.substr(5)] = rest;
    }
  }
  if (!have_magic || !have_shape) {
    throw std::runtime_error("malformed tensor header " + with_suffix(stem, ".hdr").string());
  }
  const Index count = numel(shape);
  std::ifstream data(with_suffix(stem, ".f32"), std::ios::binary);
  if (!data) throw std::runtime_error("missing tensor data " + with_suffix(stem, ".f32").string());
  std::vector<std::uint32_t> words(static_cast<std::size_t>(count));
  data.read(reinterpret_cast<char*>(words.data()),
            static_cast<std::streamsize>(words.size() * sizeof(std::uint32_t)));
  if (data.gcount() != static_cast<std::streamsize>(words.size() * sizeof(std::uint32_t)) ||
      data.peek() != std::char_traits<char>::eof()) {
    throw std::runtime_error("tensor data size does not match header shape " + shape_string(shape) +
                             " in " + with_suffix(stem, ".f32").string());
  }
  std::vector<float> values(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) values[i] = std::bit_cast<float>(to_little(words[i]));
  out.tensor = Tensor<float>(std::move(shape), std::move(values));
  return out;
}

void write_video(const fs::path& stem, const Video& v, const std::string& role) {
  write_tensor(stem, v.frames, role, {{"frame_rate", format_double(v.frame_rate)}});
}

Video read_video(const fs::path& stem) {
  TensorFile f = read_tensor(stem);
  if (f.tensor.rank() != 4 || f.tensor.dim(3) != 3) {
    throw std::runtime_error("video tensor must be [T,W,H,3], got " + shape_string(f.tensor.shape()));
  }
  Video v;
  v.frames = std::move(f.tensor);
  auto it = f.attributes.find("frame_rate");
  if (it != f.attributes.end()) v.frame_rate = parse_double(it->second, "frame_rate");
  return v;
}

void write_audio(const fs::path& stem, const AudioClip& a, const std::string& role) {
  Tensor<float> t(Shape{static_cast<Index>(a.samples.size())}, a.samples);
  write_tensor(stem, t, role, {{"sample_rate", format_double(a.sample_rate)}});
}

AudioClip read_audio(const fs::path& stem) {
  TensorFile f = read_tensor(stem);
  if (f.tensor.rank() != 1) throw std::runtime_error("audio tensor must be rank 1");
  AudioClip a;
  a.samples = f.tensor.storage();
  auto it = f.attributes.find("sample_rate");
  if (it != f.attributes.end()) a.sample_rate = parse_double(it->second, "sample_rate");
  return a;
}

ManifestRecord write_blend_sample(const fs::path& dir, const std::string& id, const BlendSample& s) {
  ManifestRecord r;
  r.id = id;
  r.v1_path = id + "_v1";
  r.v2_path = id + "_v2";
  r.alpha_path = id + "_alpha";
  r.blended_path = id + "_blended";
  write_video(dir / r.v1_path, s.v1, "v1");
  write_video(dir / r.v2_path, s.v2, "v2");
  write_tensor(dir / r.alpha_path, s.alpha, "alpha");
  write_video(dir / r.blended_path, s.blended, "blended");
  if (s.audio1) {
    r.audio_path = id + "_audio1";
    write_audio(dir / r.audio_path, *s.audio1, "audio1");
  }
  r.blend_mode = s.blend_mode;
  r.metadata = s.metadata;
  return r;
}

BlendSample read_blend_sample(const fs::path& dir, const ManifestRecord& r) {
  BlendSample s;
  s.v1 = read_video(dir / r.v1_path);
  s.v2 = read_video(dir / r.v2_path);
  s.alpha = read_tensor(dir / r.alpha_path).tensor;
  s.blended = read_video(dir / r.blended_path);
  if (!r.audio_path.empty()) s.audio1 = read_audio(dir / r.audio_path);
  s.blend_mode = r.blend_mode;
  s.metadata = r.metadata;
  return s;
}

void write_manifest(const fs::path& path, const DatasetManifest& m) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write manifest " + path.string());
  json header{{"kind", "manifest"}, {"version", 1}, {"seed", m.seed},
              {"count", m.records.size()}};
  os << header.dump() << "\n";
  for (const auto& r : m.records) {
    json j{{"id", r.id},
           {"v1", r.v1_path},
           {"v2", r.v2_path},
           {"alpha", r.alpha_path},
           {"blended", r.blended_path},
           {"blend_mode", to_string(r.blend_mode)},
           {"metadata", r.metadata}};
    if (!r.audio_path.empty()) j["audio"] = r.audio_path;
    os << j.dump() << "\n";
  }
}

DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read manifest " + path.string());
  DatasetManifest m;
  std::string line;
  bool header = false;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!header) {
      if (j.value("kind", "") != "manifest") {
        throw std::runtime_error(path.string() + ": first line must be the manifest header");
      }
      m.seed = j.value("seed", std::uint64_t{0});
      header = true;
      continue;
    }
    ManifestRecord r;
    r.id = j.at("id").get<std::string>();
    r.v1_path = j.at("v1").get<std::string>();
    r.v2_path = j.at("v2").get<std::string>();
    r.alpha_path = j.at("alpha").get<std::string>();
    r.blended_path = j.value("blended", std::string{});
    r.audio_path = j.value("audio", std::string{});
    r.blend_mode = blend_mode_from_string(j.at("blend_mode").get<std::string>());
    if (j.contains("metadata")) r.metadata = j["metadata"].get<std::map<std::string, std::string>>();
    m.records.push_back(std::move(r));
  }
  if (!header) throw std::runtime_error(path.string() + ": empty manifest");
  return m;
}

std::vector<std::string> validate_manifest(const DatasetManifest& m, const fs::path& dir) {
  std::vector<std::string> problems;
  std::set<std::string> ids;
  for (const auto& r : m.records) {
    if (!ids.insert(r.id).second) problems.push_back("duplicate id " + r.id);
    for (const std::string* p : {&r.v1_path, &r.v2_path, &r.alpha_path, &r.blended_path, &r.audio_path}) {
      if (p->empty()) continue;
      if (!fs::exists(with_suffix(dir / *p, ".f32")) || !fs::exists(with_suffix(dir / *p, ".hdr"))) {
        problems.push_back("record " + r.id + " references missing tensor " + *p);
      }
    }
  }
  return problems;
}

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}
std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>(v >> 8));
}

}  // namespace

AudioClip read_wav(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw std::runtime_error(path.string() + ": not a RIFF/WAVE file");
  }
  std::size_t pos = 12;
  std::uint16_t channels = 0, bits = 0, format = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t size = read_u32(bytes.data() + pos + 4);
    const unsigned char* body = bytes.data() + pos + 8;
    if (pos + 8 + size > bytes.size()) throw std::runtime_error(path.string() + ": truncated chunk");
    if (std::memcmp(bytes.data() + pos, "fmt ", 4) == 0) {
      if (size < 16) throw std::runtime_error(path.string() + ": short fmt chunk");
      format = read_u16(body);
      channels = read_u16(body + 2);
      rate = read_u32(body + 4);
      bits = read_u16(body + 14);
      have_fmt = true;
    } else if (std::memcmp(bytes.data() + pos, "data", 4) == 0) {
      if (!have_fmt) throw std::runtime_error(path.string() + ": data chunk before fmt chunk");
      if (format != 1 || bits != 16) throw std::runtime_error(path.string() + ": only 16-bit PCM is supported");
      if (channels != 1) throw std::runtime_error(path.string() + ": only mono audio is supported");
      AudioClip a;
      a.sample_rate = rate;
      a.samples.resize(size / 2);
      for (std::size_t i = 0; i < a.samples.size(); ++i) {
        const auto v = static_cast<std::int16_t>(read_u16(body + 2 * i));
        a.samples[i] = std::max(static_cast<float>(v) / 32767.0f, -1.0f);
      }
      return a;
    }
    pos += 8 + size + (size & 1);
  }
  throw std::runtime_error(path.string() + ": no data chunk");
}

void write_wav(const fs::path& path, const AudioClip& a) {
  std::string out = "RIFF";
  const auto data_bytes = static_cast<std::uint32_t>(a.samples.size() * 2);
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  const auto rate = static_cast<std::uint32_t>(std::lround(a.sample_rate));
  put_u32(out, rate);
  put_u32(out, rate * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_bytes);
  for (float s : a.samples) {
    const long q = std::lround(std::clamp(s, -1.0f, 1.0f) * 32767.0f);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace c3::io
