#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace notemesh {

// Base of every error the library throws. kind() is the stable type name
// used by the CLI when printing ("FormatError: ...").
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define NOTEMESH_DEFINE_ERROR(Name)                                    \
  class Name : public Error {                                          \
   public:                                                             \
    explicit Name(const std::string& message) : Error(#Name, message) {} \
  };

NOTEMESH_DEFINE_ERROR(RangeError)
NOTEMESH_DEFINE_ERROR(FormatError)
NOTEMESH_DEFINE_ERROR(UnsupportedMode)
NOTEMESH_DEFINE_ERROR(EmptyScore)
NOTEMESH_DEFINE_ERROR(KeyMismatch)
NOTEMESH_DEFINE_ERROR(DanglingNoteError)
NOTEMESH_DEFINE_ERROR(InsufficientData)
NOTEMESH_DEFINE_ERROR(KindMismatch)
NOTEMESH_DEFINE_ERROR(InsufficientSamples)
NOTEMESH_DEFINE_ERROR(DatasetError)
NOTEMESH_DEFINE_ERROR(TrackOutOfRange)
NOTEMESH_DEFINE_ERROR(EmptyRange)
NOTEMESH_DEFINE_ERROR(KeyParseError)

#undef NOTEMESH_DEFINE_ERROR

// Token stream violation; index is the position of the first offending token.
class GrammarError : public Error {
 public:
  GrammarError(std::size_t index, const std::string& message)
      : Error("GrammarError", "token " + std::to_string(index) + ": " + message),
        index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

// JSON document violation; path is a JSON pointer to the first offending value.
class SchemaError : public Error {
 public:
  SchemaError(std::string path, const std::string& message)
      : Error("SchemaError", path + ": " + message), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class UnknownToken : public Error {
 public:
  explicit UnknownToken(std::string token)
      : Error("UnknownToken", "unknown token '" + token + "'"), token_(std::move(token)) {}

  const std::string& token() const noexcept { return token_; }

 private:
  std::string token_;
};

}  // namespace notemesh
