#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sego/autodiff.hpp"

namespace sego {

struct NamedMatrix {
  std::string name;
  Matrix value;
};

// Layout: u64 count, then per entry u64 name length, name bytes, u64 rows,
// u64 cols, rows*cols f64 row-major. All integers and reals little-endian.
void write_checkpoint(std::ostream& out, std::span<const NamedMatrix> entries);
std::vector<NamedMatrix> read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, std::span<const NamedMatrix> entries);
std::vector<NamedMatrix> load_checkpoint(const std::filesystem::path& path);

std::vector<NamedMatrix> snapshot(std::span<ad::Parameter* const> params);
// Copies values into `params` by name. Throws ParseError on a missing name or
// shape mismatch.
void restore(std::span<ad::Parameter* const> params, std::span<const NamedMatrix> entries);

}  // namespace sego
