#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace ensemjudge::utf8 {

// Decodes UTF-8 into Unicode scalar values. Throws DataError on malformed
// input (overlong forms, surrogates, truncated sequences).
std::u32string decode(std::string_view bytes);

std::string encode(std::u32string_view scalars);
std::string encode(char32_t scalar);

std::size_t scalar_count(std::string_view bytes);

// Non-overlapping occurrence count of `needle` in `haystack`.
std::size_t count_occurrences(std::string_view haystack, std::string_view needle);

}  // namespace ensemjudge::utf8
