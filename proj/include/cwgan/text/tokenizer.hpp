#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace cwgan::text {

using TokenId = std::int32_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr TokenId kSep = 4;
inline constexpr TokenId kReservedCount = 5;

/// Lowercases ASCII, splits every punctuation character into its own token,
/// and collapses whitespace. Bytes >= 0x80 are kept inside words.
std::vector<std::string> tokenize(std::string_view text);

/// Joins tokens with single spaces, with no space before closing punctuation.
std::string detokenize(const std::vector<std::string>& tokens);

/// tokenize() followed by a plain space join.
std::string normalize(std::string_view text);

}  // namespace cwgan::text
