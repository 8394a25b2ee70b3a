#ifndef PGMR_TEXT_H_
#define PGMR_TEXT_H_

#include <string>
#include <string_view>
#include <vector>

namespace pgmr {

// Unicode case-fold, trim, and collapse internal whitespace runs to one
// space. Used as the key of the exact-label index.
std::string NormalizeLabel(std::string_view label);

// ASCII lowercase; other bytes are passed through.
std::string AsciiLower(std::string_view s);

std::string_view Trim(std::string_view s);

// Collapses every whitespace run to a single space and trims.
std::string CollapseWhitespace(std::string_view s);

std::vector<std::string> SplitWhitespace(std::string_view s);

bool IsSpace(char c);

// Lowercase hex SHA-256 digest of the bytes of `data`.
std::string Sha256Hex(std::string_view data);

}  // namespace pgmr

#endif  // PGMR_TEXT_H_
