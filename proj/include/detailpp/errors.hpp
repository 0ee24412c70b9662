#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace detailpp {

// Every failure raised by the library derives from Error. The category
// decides how the command-line front end reports it.
enum class ErrorCategory { kParse, kNumeric };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

#define DETAILPP_DEFINE_ERROR(Name, Category)                                  \
  class Name : public Error {                                                  \
   public:                                                                     \
    explicit Name(const std::string& what) : Error(Category, what) {}          \
  };

DETAILPP_DEFINE_ERROR(NumericInputError, ErrorCategory::kNumeric)
DETAILPP_DEFINE_ERROR(ConfigError, ErrorCategory::kNumeric)
DETAILPP_DEFINE_ERROR(ShapeError, ErrorCategory::kNumeric)
DETAILPP_DEFINE_ERROR(IndexError, ErrorCategory::kNumeric)
DETAILPP_DEFINE_ERROR(SpanError, ErrorCategory::kNumeric)
DETAILPP_DEFINE_ERROR(DegenerateMapError, ErrorCategory::kNumeric)
DETAILPP_DEFINE_ERROR(BoxError, ErrorCategory::kNumeric)
DETAILPP_DEFINE_ERROR(IoError, ErrorCategory::kNumeric)
DETAILPP_DEFINE_ERROR(ParseInputError, ErrorCategory::kParse)

#undef DETAILPP_DEFINE_ERROR

// Grammar violation; token_index points at the first token that could not be
// consumed (equal to the token count when input ended early).
class ParseError : public Error {
 public:
  ParseError(std::size_t token_index, const std::string& what)
      : Error(ErrorCategory::kParse, what), token_index_(token_index) {}
  std::size_t token_index() const noexcept { return token_index_; }

 private:
  std::size_t token_index_;
};

}  // namespace detailpp
