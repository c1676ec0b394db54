// Copyright 2026 The HyperMix Authors
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

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "hypermix/diff.hpp"
#include "hypermix/error.hpp"

namespace hypermix::diff {
namespace {

constexpr const char* kMagic = "hypermix-ckpt v1";

void append_double(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

}  // namespace

std::string format_checkpoint(const Checkpoint& ckpt) {
  std::string out = kMagic;
  out += '\n';
  for (const auto& c : ckpt.header_comments) {
    out += "# ";
    out += c;
    out += '\n';
  }
  for (const auto& [name, m] : ckpt.tensors) {
    if (name.empty() || name.find_first_of(" \t\n#") != std::string::npos) {
      throw IoError("checkpoint: invalid tensor name '" + name + "'");
    }
    out += name;
    out += " 2 " + std::to_string(m.rows()) + " " + std::to_string(m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        out += ' ';
        append_double(out, m(i, j));
      }
    }
    out += '\n';
  }
  return out;
}

Checkpoint parse_checkpoint(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw IoError(origin + ": missing '" + kMagic + "' header");
  }
  Checkpoint ckpt;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      ckpt.header_comments.push_back(line.size() > 2 ? line.substr(2) : std::string());
      continue;
    }
    std::istringstream ls(line);
    std::string name;
    int rank = 0;
    ls >> name >> rank;
    if (!ls || rank < 0 || rank > 2) {
      throw IoError(origin + ":" + std::to_string(lineno) + ": bad tensor header");
    }
    long dims[2] = {1, 1};
    for (int d = 0; d < rank; ++d) ls >> dims[d];
    if (!ls || dims[0] < 0 || dims[1] < 0) {
      throw IoError(origin + ":" + std::to_string(lineno) + ": bad dimensions");
    }
    // Rank-1 tensors load as a single row.
    const long rows = rank == 2 ? dims[0] : 1;
    const long cols = rank == 2 ? dims[1] : (rank == 1 ? dims[0] : 1);
    Matrix m(rows, cols);
    for (long i = 0; i < rows; ++i) {
      for (long j = 0; j < cols; ++j) {
        std::string tok;
        if (!(ls >> tok)) {
          throw IoError(origin + ":" + std::to_string(lineno) + ": too few values for '" + name + "'");
        }
        char* end = nullptr;
        errno = 0;
        const double v = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0') {
          throw IoError(origin + ":" + std::to_string(lineno) + ": bad value '" + tok + "'");
        }
        m(i, j) = v;
      }
    }
    std::string extra;
    if (ls >> extra) {
      throw IoError(origin + ":" + std::to_string(lineno) + ": too many values for '" + name + "'");
    }
    if (!ckpt.tensors.emplace(name, std::move(m)).second) {
      throw IoError(origin + ": duplicate tensor '" + name + "'");
    }
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const std::string text = format_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str(), path);
}

}  // namespace hypermix::diff
