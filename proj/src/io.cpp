// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dfm/io.hpp"

#include <atomic>
#include <charconv>
#include <fstream>
#include <sstream>
#include <thread>

#include <unistd.h>

namespace dfm {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  static std::atomic<std::uint64_t> counter{0};
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string());
  }
  std::ostringstream tmp_name;
  tmp_name << path.filename().string() << ".tmp." << ::getpid() << "."
           << std::hash<std::thread::id>{}(std::this_thread::get_id()) << "." << counter++;
  const fs::path tmp = path.parent_path() / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move " + tmp.string() + " to " + path.string());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  return out;
}

std::vector<std::vector<std::string>> parse_rows(const std::string& text,
                                                 std::vector<std::string>* header,
                                                 const std::string& source) {
  std::istringstream is(text);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  bool have_header = false;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    if (!have_header) {
      *header = split_line(line);
      have_header = true;
      continue;
    }
    rows.push_back(split_line(line));
    if (rows.back().size() != header->size()) {
      std::ostringstream os;
      os << source << ": row " << rows.size() << " has " << rows.back().size()
         << " fields, header has " << header->size();
      throw ConfigurationError(os.str());
    }
  }
  if (!have_header) throw ConfigurationError(source + ": missing header row");
  return rows;
}

double parse_double(const std::string& s, const std::string& source) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigurationError(source + ": not a number: '" + s + "'");
  }
  return v;
}

std::size_t parse_index(const std::string& s, const std::string& source) {
  std::size_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigurationError(source + ": not a nonnegative integer: '" + s + "'");
  }
  return v;
}

}  // namespace

std::string dataset_to_csv(const Dataset& data) {
  std::string out;
  for (std::size_t j = 0; j < data.dim(); ++j) {
    if (j) out += ',';
    out += "dim_" + std::to_string(j);
  }
  if (data.has_labels()) out += ",label";
  out += '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < data.dim(); ++j) {
      if (j) out += ',';
      out += format_double(data.point(i)[j]);
    }
    if (data.has_labels()) out += "," + std::to_string(data.labels()[i]);
    out += '\n';
  }
  return out;
}

Dataset dataset_from_csv(const std::string& text, const std::string& source) {
  std::vector<std::string> header;
  const auto rows = parse_rows(text, &header, source);
  const bool labelled = !header.empty() && header.back() == "label";
  const std::size_t d = header.size() - (labelled ? 1 : 0);
  if (d == 0) throw ConfigurationError(source + ": no dim_ columns");
  for (std::size_t j = 0; j < d; ++j) {
    if (header[j] != "dim_" + std::to_string(j)) {
      throw ConfigurationError(source + ": expected column dim_" + std::to_string(j) +
                               ", found '" + header[j] + "'");
    }
  }
  if (rows.empty()) throw ConfigurationError(source + ": no data rows");
  Matrix pts(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      pts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          parse_double(rows[i][j], source);
    }
    if (labelled) labels.push_back(parse_index(rows[i][d], source));
  }
  if (labelled) return Dataset(std::move(pts), std::move(labels));
  return Dataset(std::move(pts));
}

void save_dataset(const fs::path& path, const Dataset& data) {
  write_file_atomic(path, dataset_to_csv(data));
}

Dataset load_dataset(const fs::path& path) {
  return dataset_from_csv(read_file(path), path.string());
}

std::string assignment_to_csv(const std::vector<std::size_t>& assignment) {
  std::string out = "index,cluster\n";
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    out += std::to_string(i) + "," + std::to_string(assignment[i]) + "\n";
  }
  return out;
}

std::vector<std::size_t> assignment_from_csv(const std::string& text,
                                             const std::string& source) {
  std::vector<std::string> header;
  const auto rows = parse_rows(text, &header, source);
  if (header != std::vector<std::string>{"index", "cluster"}) {
    throw ConfigurationError(source + ": expected header 'index,cluster'");
  }
  std::vector<std::size_t> out(rows.size());
  std::vector<bool> seen(rows.size(), false);
  for (const auto& row : rows) {
    const std::size_t i = parse_index(row[0], source);
    if (i >= rows.size() || seen[i]) {
      throw ConfigurationError(source + ": indices must be a permutation of 0..n-1");
    }
    seen[i] = true;
    out[i] = parse_index(row[1], source);
  }
  return out;
}

std::string samples_to_csv(const Matrix& samples) {
  std::string out = "sample_id";
  for (Eigen::Index j = 0; j < samples.cols(); ++j) out += ",dim_" + std::to_string(j);
  out += '\n';
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    out += std::to_string(i);
    for (Eigen::Index j = 0; j < samples.cols(); ++j) out += "," + format_double(samples(i, j));
    out += '\n';
  }
  return out;
}

Matrix samples_from_csv(const std::string& text, const std::string& source) {
  std::vector<std::string> header;
  const auto rows = parse_rows(text, &header, source);
  if (header.empty() || header[0] != "sample_id") {
    throw ConfigurationError(source + ": expected leading sample_id column");
  }
  Matrix out(static_cast<Eigen::Index>(rows.size()),
             static_cast<Eigen::Index>(header.size() - 1));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 1; j < header.size(); ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j - 1)) =
          parse_double(rows[i][j], source);
    }
  }
  return out;
}

}  // namespace dfm
