#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "svip/symbolic.hpp"

namespace svip {

/// Lexical, syntactic or semantic error in a domain/problem text, with a
/// 1-based source position.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int column, const std::string& msg)
      : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + msg), line_(line), column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

Domain parse_domain(std::string_view text);

/// When `domain` is given, predicates, arities and object types are checked.
Problem parse_problem(std::string_view text, const Domain* domain = nullptr);

std::string serialize(const Domain& d);
std::string serialize(const Problem& p);

Domain load_domain(const std::string& path);
Problem load_problem(const std::string& path, const Domain* domain = nullptr);

}  // namespace svip
