// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0
//
// File formats: dataset, assignment and sample CSVs, plus atomic writes.
// Numbers are written in shortest round-trip decimal form.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dfm/dataset.hpp"

namespace dfm {

std::string format_double(double v);

// Writes to a sibling temporary file and renames it into place, so readers
// never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

// Header `dim_0,...,dim_{d-1}[,label]`.
std::string dataset_to_csv(const Dataset& data);
Dataset dataset_from_csv(const std::string& text, const std::string& source = "dataset");
void save_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path);

// Header `index,cluster`.
std::string assignment_to_csv(const std::vector<std::size_t>& assignment);
std::vector<std::size_t> assignment_from_csv(const std::string& text,
                                             const std::string& source = "assignment");

// Header `sample_id,dim_0,...`.
std::string samples_to_csv(const Matrix& samples);
Matrix samples_from_csv(const std::string& text, const std::string& source = "samples");

}  // namespace dfm
