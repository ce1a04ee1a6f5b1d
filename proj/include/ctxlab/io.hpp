#pragma once

#include <string>
#include <string_view>

namespace ctxlab::io {

std::string read_file(const std::string& path);
// Writes bytes exactly as given (binary mode, no newline translation).
void write_file(const std::string& path, std::string_view contents);

}  // namespace ctxlab::io
