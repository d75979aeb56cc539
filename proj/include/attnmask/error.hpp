#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace attnmask {

/// Base of every error raised by the library. Carries a short kind tag so the
/// CLI can map failures to exit codes and stage-tagged messages.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message);

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

/// Malformed or unsupported ATND stream (bad magic, version, truncation).
class FormatError : public Error {
public:
    explicit FormatError(const std::string& message) : Error("format", message) {}
};

/// Tensor or image dimensions that disagree with a header or with each other.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& message) : Error("shape", message) {}
};

/// A documented data invariant does not hold (non-finite values, row sums, ranges).
class InvariantError : public Error {
public:
    explicit InvariantError(const std::string& message) : Error("invariant", message) {}
};

/// Bad argument or configuration value.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message) : Error("config", message) {}
};

/// Reading or writing a file failed.
class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error("io", message) {}
};

class UnmatchedKeywordError : public Error {
public:
    UnmatchedKeywordError(std::string keyword, std::vector<std::string> candidates);

    const std::string& keyword() const noexcept { return keyword_; }
    const std::vector<std::string>& candidates() const noexcept { return candidates_; }

private:
    std::string keyword_;
    std::vector<std::string> candidates_;
};

/// Foreground or background pixel set became empty during segmentation.
class DegenerateRegionError : public Error {
public:
    explicit DegenerateRegionError(const std::string& message) : Error("degenerate-region", message) {}
};

/// Chat backend unreachable, timed out or returned an unusable reply.
class BackendError : public Error {
public:
    explicit BackendError(const std::string& message) : Error("backend", message) {}
};

/// Agent loop failure: validation exhausted, unparseable replies, empty foreground.
class AgentError : public Error {
public:
    AgentError(std::string kind, const std::string& message) : Error(std::move(kind), message) {}
};

}  // namespace attnmask
