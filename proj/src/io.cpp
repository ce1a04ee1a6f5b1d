#include "ctxlab/io.hpp"

#include <fstream>
#include <sstream>

#include "ctxlab/error.hpp"

namespace ctxlab {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return "config_error";
    case ErrorKind::Range: return "range_error";
    case ErrorKind::Capacity: return "capacity_error";
    case ErrorKind::Domain: return "domain_error";
    case ErrorKind::Encoding: return "encoding_error";
    case ErrorKind::Length: return "length_error";
    case ErrorKind::Shape: return "shape_error";
    case ErrorKind::Input: return "input_error";
    case ErrorKind::Io: return "io_error";
    case ErrorKind::Training: return "training_error";
  }
  return "error";
}

namespace io {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open '" + path + "' for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) fail(ErrorKind::Io, "write to '" + path + "' failed");
}

}  // namespace io
}  // namespace ctxlab
