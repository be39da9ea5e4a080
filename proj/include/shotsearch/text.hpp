#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace shotsearch::text {

/// NFC-normalizes and case-folds UTF-8 input. Throws Parse on invalid UTF-8.
std::string normalize(std::string_view utf8);

/// Splits on Unicode whitespace and normalizes every token. Empty tokens are
/// never produced; an all-whitespace input yields an empty vector.
std::vector<std::string> tokenize(std::string_view utf8);

/// Decodes UTF-8 into Unicode scalar values. Throws Parse on invalid UTF-8.
std::u32string to_scalars(std::string_view utf8);

}  // namespace shotsearch::text
