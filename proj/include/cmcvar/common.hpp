// Shared vocabulary types and error classes.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cmcvar {

/// Failure classes. Each maps onto one CLI exit code.
enum class ErrorKind { Config, Data, Convergence };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

  int exit_code() const noexcept {
    switch (kind_) {
      case ErrorKind::Config: return 2;
      case ErrorKind::Data: return 3;
      case ErrorKind::Convergence: return 4;
    }
    return 1;
  }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

class ConvergenceError : public Error {
 public:
  explicit ConvergenceError(const std::string& what) : Error(ErrorKind::Convergence, what) {}
};

/// Complete (or quasi-complete) separation of the response.
class SeparationError : public ConvergenceError {
 public:
  explicit SeparationError(const std::string& what) : ConvergenceError(what) {}
};

enum class Gender { Female, Male };
enum class Region { WestFlanders, EastFlanders, Brabant, Limburg };
enum class Category { Standard, Chat, Regional };

inline constexpr std::array<Gender, 2> kAllGenders{Gender::Female, Gender::Male};
inline constexpr std::array<Region, 4> kAllRegions{Region::WestFlanders, Region::EastFlanders,
                                                   Region::Brabant, Region::Limburg};

inline std::string_view to_string(Gender g) { return g == Gender::Female ? "f" : "m"; }

inline std::string_view to_string(Region r) {
  switch (r) {
    case Region::WestFlanders: return "west-flanders";
    case Region::EastFlanders: return "east-flanders";
    case Region::Brabant: return "brabant";
    case Region::Limburg: return "limburg";
  }
  return "?";
}

inline std::string_view to_string(Category c) {
  switch (c) {
    case Category::Standard: return "std";
    case Category::Chat: return "chat";
    case Category::Regional: return "reg";
  }
  return "?";
}

inline std::optional<Gender> parse_gender(std::string_view s) {
  if (s == "f") return Gender::Female;
  if (s == "m") return Gender::Male;
  return std::nullopt;
}

inline std::optional<Region> parse_region(std::string_view s) {
  for (Region r : kAllRegions)
    if (to_string(r) == s) return r;
  return std::nullopt;
}

inline std::optional<Category> parse_category(std::string_view s) {
  if (s == "std") return Category::Standard;
  if (s == "chat") return Category::Chat;
  if (s == "reg") return Category::Regional;
  return std::nullopt;
}

/// Contrast names as used on the command line and in output file names.
inline std::string_view contrast_name(Category positive) {
  return positive == Category::Regional ? "regional" : "chat";
}

inline std::optional<Category> parse_contrast(std::string_view s) {
  if (s == "chat") return Category::Chat;
  if (s == "regional") return Category::Regional;
  return std::nullopt;
}

}  // namespace cmcvar
