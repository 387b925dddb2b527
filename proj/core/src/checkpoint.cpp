#include "sego/checkpoint.hpp"

#include <fstream>
#include <map>

#include "binary_io.hpp"
#include "sego/errors.hpp"

namespace sego {

void write_checkpoint(std::ostream& out, std::span<const NamedMatrix> entries) {
  using namespace detail;
  write_u64(out, entries.size());
  for (const auto& e : entries) {
    write_string(out, e.name);
    write_u64(out, static_cast<std::uint64_t>(e.value.rows()));
    write_u64(out, static_cast<std::uint64_t>(e.value.cols()));
    for (Eigen::Index i = 0; i < e.value.size(); ++i) write_f64(out, e.value.data()[i]);
  }
}

std::vector<NamedMatrix> read_checkpoint(std::istream& in) {
  using namespace detail;
  const auto count = read_u64(in);
  if (count > (1u << 20)) throw ParseError("checkpoint entry count " + std::to_string(count) + " is implausible");
  std::vector<NamedMatrix> entries;
  entries.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedMatrix e;
    e.name = read_string(in);
    const auto rows = read_u64(in);
    const auto cols = read_u64(in);
    if (rows > (1u << 24) || cols > (1u << 24) || rows * cols > (1u << 28)) {
      throw ParseError("checkpoint matrix '" + e.name + "' has implausible shape");
    }
    e.value.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index j = 0; j < e.value.size(); ++j) e.value.data()[j] = read_f64(in);
    entries.push_back(std::move(e));
  }
  return entries;
}

void save_checkpoint(const std::filesystem::path& path, std::span<const NamedMatrix> entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open checkpoint for writing: " + path.string());
  write_checkpoint(out, entries);
  if (!out) throw ParseError("failed writing checkpoint " + path.string());
}

std::vector<NamedMatrix> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

std::vector<NamedMatrix> snapshot(std::span<ad::Parameter* const> params) {
  std::vector<NamedMatrix> out;
  out.reserve(params.size());
  for (const auto* p : params) out.push_back({p->name, p->value});
  return out;
}

void restore(std::span<ad::Parameter* const> params, std::span<const NamedMatrix> entries) {
  std::map<std::string, const NamedMatrix*> by_name;
  for (const auto& e : entries) by_name[e.name] = &e;
  for (auto* p : params) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) throw ParseError("checkpoint has no entry '" + p->name + "'");
    const Matrix& v = it->second->value;
    if (v.rows() != p->value.rows() || v.cols() != p->value.cols()) {
      throw ParseError("checkpoint entry '" + p->name + "' has shape " + shape_string(v) + ", expected " +
                       shape_string(p->value));
    }
    p->value = v;
    p->zero_grad();
  }
}

}  // namespace sego
