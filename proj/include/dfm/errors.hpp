// Copyright 2026 The DFM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace dfm {

enum class ErrorKind {
  kDomain,
  kShape,
  kArgument,
  kNumericalDegeneracy,
  kConfiguration,
  kSampling,
  kIo,
  kUsage,
  kWorkerFailure,
};

const char* to_string(ErrorKind kind);

// Base of every error thrown by the library. The kind drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define DFM_DEFINE_ERROR(Name, Kind)                                   \
  class Name : public Error {                                          \
   public:                                                             \
    explicit Name(const std::string& what) : Error(Kind, what) {}      \
  }

DFM_DEFINE_ERROR(DomainError, ErrorKind::kDomain);
DFM_DEFINE_ERROR(ShapeError, ErrorKind::kShape);
DFM_DEFINE_ERROR(ArgumentError, ErrorKind::kArgument);
DFM_DEFINE_ERROR(NumericalDegeneracyError, ErrorKind::kNumericalDegeneracy);
DFM_DEFINE_ERROR(ConfigurationError, ErrorKind::kConfiguration);
DFM_DEFINE_ERROR(SamplingError, ErrorKind::kSampling);
DFM_DEFINE_ERROR(IoError, ErrorKind::kIo);
DFM_DEFINE_ERROR(UsageError, ErrorKind::kUsage);
DFM_DEFINE_ERROR(WorkerFailureError, ErrorKind::kWorkerFailure);

#undef DFM_DEFINE_ERROR

}  // namespace dfm
