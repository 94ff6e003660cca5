/******************************************************************************
 * Copyright 2026 The segopt Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *****************************************************************************/
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace segopt {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Log map evaluated too close to the rotation-angle-pi cut.
class BranchError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// The normal equations could not be factorized even with heavy damping.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

class ReductionError : public Error {
 public:
  using Error::Error;
};

/// Connecting-frame chain broke inside a segment.
class GapError : public Error {
 public:
  GapError(int stuck_frame, const std::string& what)
      : Error(what), stuck_frame_(stuck_frame) {}
  int stuck_frame() const { return stuck_frame_; }

 private:
  int stuck_frame_;
};

class AnchoringError : public Error {
 public:
  using Error::Error;
};

class AlignmentError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

/// Bad command line, unknown method name, or malformed scenario.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace segopt
