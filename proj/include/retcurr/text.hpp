#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace retcurr {

// Lowercases ASCII letters and splits on whitespace and punctuation
// (ASCII plus the common Unicode space and general-punctuation code points).
// Other non-ASCII code points are kept verbatim inside tokens.
std::vector<std::string> tokenize(std::string_view text);

// Lowercase, trim, collapse internal whitespace runs to a single space.
std::string normalize_answer(std::string_view text);

std::string join_tokens(const std::vector<std::string>& tokens, std::size_t begin,
                        std::size_t end);

}  // namespace retcurr
