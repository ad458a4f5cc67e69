// Copyright 2026 The vslab Authors.
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

#pragma once

#include <stdexcept>
#include <string>

namespace vslab {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define VSLAB_DEFINE_ERROR(Name)                       \
  class Name : public Error {                          \
   public:                                             \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
  }

VSLAB_DEFINE_ERROR(NonOrthonormalInput);
VSLAB_DEFINE_ERROR(DegenerateView);
VSLAB_DEFINE_ERROR(InvalidArgument);
VSLAB_DEFINE_ERROR(RejectionExhausted);
VSLAB_DEFINE_ERROR(IoFailure);
VSLAB_DEFINE_ERROR(FormatVersionMismatch);
VSLAB_DEFINE_ERROR(ChecksumMismatch);
VSLAB_DEFINE_ERROR(ShapeMismatch);
VSLAB_DEFINE_ERROR(LengthMismatch);
VSLAB_DEFINE_ERROR(UnsupportedOp);
VSLAB_DEFINE_ERROR(EmptyDataset);
VSLAB_DEFINE_ERROR(DivergenceDetected);
VSLAB_DEFINE_ERROR(EmptyValidation);
VSLAB_DEFINE_ERROR(IncompatibleBundle);

#undef VSLAB_DEFINE_ERROR

}  // namespace vslab
