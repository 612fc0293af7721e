#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace tutorstack::csv {

/// Splits one CSV record. Handles double-quoted fields with "" escapes; does
/// not support embedded newlines.
std::vector<std::string> split_record(std::string_view line);

/// Quotes a field only when it contains a comma, quote, or newline.
std::string escape_field(std::string_view field);

/// Reads all non-empty records of a file. Strips a UTF-8 BOM and trailing CR.
std::vector<std::vector<std::string>> read_file(const std::string& path);

}  // namespace tutorstack::csv
