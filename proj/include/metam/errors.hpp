#pragma once

#include <stdexcept>
#include <string>

namespace metam {

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct EmptyRepositoryError : std::runtime_error {
    explicit EmptyRepositoryError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionMismatch : std::runtime_error {
    explicit DimensionMismatch(const std::string& msg) : std::runtime_error(msg) {}
};

struct KeyColumnMissing : std::runtime_error {
    explicit KeyColumnMissing(const std::string& msg) : std::runtime_error(msg) {}
};

// External or built-in task crashed, timed out, or returned garbage.
struct TaskFailure : std::runtime_error {
    explicit TaskFailure(const std::string& msg) : std::runtime_error(msg) {}
};

// Brute-force oracle refused: candidate set above the factorial guard.
struct TooLarge : std::runtime_error {
    explicit TooLarge(const std::string& msg) : std::runtime_error(msg) {}
};

// join-everything refused: materialized width above the column cap.
struct TooWide : std::runtime_error {
    explicit TooWide(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace metam
