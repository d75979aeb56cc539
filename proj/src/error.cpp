#include "attnmask/error.hpp"

#include <utility>

namespace attnmask {

Error::Error(std::string kind, const std::string& message)
    : std::runtime_error(message), kind_(std::move(kind)) {}

namespace {

std::string unmatched_message(const std::string& keyword, const std::vector<std::string>& candidates) {
    std::string msg = "keyword '" + keyword + "' matches no valid token";
    if (!candidates.empty()) {
        msg += "; closest tokens:";
        for (const auto& c : candidates) msg += " '" + c + "'";
    }
    return msg;
}

}  // namespace

UnmatchedKeywordError::UnmatchedKeywordError(std::string keyword, std::vector<std::string> candidates)
    : Error("unmatched-keyword", unmatched_message(keyword, candidates)),
      keyword_(std::move(keyword)),
      candidates_(std::move(candidates)) {}

}  // namespace attnmask
