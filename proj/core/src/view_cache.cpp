#include <fstream>

#include <spdlog/spdlog.h>

#include "binary_io.hpp"
#include "sego/errors.hpp"
#include "sego/views.hpp"

namespace sego {
namespace {

constexpr std::uint64_t kMagic = 0x31574556'4f474553ULL;  // "SEGOVEW1"

}  // namespace

ViewCache::ViewCache(std::filesystem::path directory) : directory_(std::move(directory)) {
  std::filesystem::create_directories(directory_);
}

std::filesystem::path ViewCache::entry_path(const std::string& dataset, std::size_t index, int k, int r) const {
  return directory_ / (dataset + "_g" + std::to_string(index) + "_k" + std::to_string(k) + "_r" +
                       std::to_string(r) + ".views");
}

void ViewCache::store(const TripletViews& views, const std::string& dataset, std::size_t index, int k,
                      int r) const {
  using namespace detail;
  const auto path = entry_path(dataset, index, k, r);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    write_u64(out, kMagic);
    write_u64(out, static_cast<std::uint64_t>(k));
    write_u64(out, static_cast<std::uint64_t>(r));
    write_u64(out, static_cast<std::uint64_t>(views.topo.rows()));
    write_u64(out, static_cast<std::uint64_t>(views.topo.cols()));
    for (Eigen::Index i = 0; i < views.topo.size(); ++i) write_f64(out, views.topo.data()[i]);

    const auto& tree = views.anchor;
    write_u64(out, static_cast<std::uint64_t>(tree.size()));
    write_u64(out, static_cast<std::uint64_t>(tree.root()));
    for (const auto& n : tree.nodes()) {
      write_i64(out, n.parent ? *n.parent : -1);
      write_i64(out, n.leaf_of ? *n.leaf_of : -1);
      write_i64(out, n.vol);
      write_i64(out, n.g_cut);
      write_u64(out, n.children.size());
      for (int c : n.children) write_i64(out, c);
    }
    if (!out) throw ParseError("failed writing view cache entry " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::optional<TripletViews> ViewCache::load(const Graph& g, const std::string& dataset, std::size_t index, int k,
                                            int r) const {
  using namespace detail;
  const auto path = entry_path(dataset, index, k, r);
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  try {
    if (read_u64(in) != kMagic) return std::nullopt;
    if (read_u64(in) != static_cast<std::uint64_t>(k) || read_u64(in) != static_cast<std::uint64_t>(r)) {
      return std::nullopt;
    }
    const auto rows = read_u64(in);
    const auto cols = read_u64(in);
    if (rows != static_cast<std::uint64_t>(g.node_count()) || cols != static_cast<std::uint64_t>(r + 1)) {
      return std::nullopt;
    }
    Matrix topo(rows, cols);
    for (Eigen::Index i = 0; i < topo.size(); ++i) topo.data()[i] = read_f64(in);

    const auto size = read_u64(in);
    const auto root = read_u64(in);
    if (size > 64 * (rows + 1) * (static_cast<std::uint64_t>(k) + 1)) return std::nullopt;
    std::vector<TreeNode> nodes(size);
    for (auto& n : nodes) {
      const auto parent = read_i64(in);
      const auto leaf = read_i64(in);
      if (parent >= 0) n.parent = static_cast<int>(parent);
      if (leaf >= 0) n.leaf_of = static_cast<NodeId>(leaf);
      n.vol = read_i64(in);
      n.g_cut = read_i64(in);
      const auto child_count = read_u64(in);
      if (child_count > size) return std::nullopt;
      n.children.resize(child_count);
      for (auto& c : n.children) c = static_cast<int>(read_i64(in));
    }
    auto tree = CodingTree::from_nodes(g, std::move(nodes), static_cast<int>(root));
    return TripletViews{std::cref(g), std::move(topo), std::move(tree)};
  } catch (const std::exception& e) {
    spdlog::warn("ignoring unreadable view cache entry {}: {}", path.string(), e.what());
    return std::nullopt;
  }
}

TripletViews ViewCache::get_or_build(const Graph& g, const std::string& dataset, std::size_t index, int k,
                                     int r) const {
  if (auto cached = load(g, dataset, index, k, r)) return std::move(*cached);
  auto views = build_triplet_views(g, k, r);
  store(views, dataset, index, k, r);
  return views;
}

}  // namespace sego
