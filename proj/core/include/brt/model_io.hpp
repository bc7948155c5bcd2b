#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "brt/mixed_model.hpp"

namespace brt {

// Model files are versioned structured text with full-precision decimal
// floats, column-major 9x9 matrices, and a trailing FNV-1a content checksum.
// The round trip is bitwise lossless. See docs/file-formats.md.
void save_model(const std::filesystem::path& file, const MixedModelParams& params);
void save_model(std::ostream& out, const MixedModelParams& params);

MixedModelParams load_model(const std::filesystem::path& file);
MixedModelParams load_model(std::istream& in, const std::string& source_name);

}  // namespace brt
