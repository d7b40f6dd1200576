#include "tlmg/aig/aig.hpp"

#include <algorithm>
#include <fstream>
#include <utility>

#include <nlohmann/json.hpp>

#include "tlmg/error.hpp"
#include "tlmg/numerics/ops.hpp"

namespace tlmg::aig {

using nn::Tensor;

AccountGraph::AccountGraph(std::vector<std::string> accounts,
                           std::vector<nn::WeightedEdge> edges)
    : accounts_(std::move(accounts)), edges_(std::move(edges)) {
  if (!std::is_sorted(accounts_.begin(), accounts_.end())) {
    throw OrderingError("account graph: nodes must be sorted by account id");
  }
  for (std::size_t i = 0; i < accounts_.size(); ++i) {
    if (!index_.emplace(accounts_[i], i).second) {
      throw DomainError("account graph: duplicate account " + accounts_[i]);
    }
  }
  for (auto& e : edges_) {
    if (e.u > e.v) std::swap(e.u, e.v);
    if (e.u == e.v || e.v >= accounts_.size() || e.weight < 1.0) {
      throw DomainError("account graph: invalid edge");
    }
  }
  std::sort(edges_.begin(), edges_.end(), [](const auto& a, const auto& b) {
    return std::tie(a.u, a.v) < std::tie(b.u, b.v);
  });
  for (std::size_t i = 1; i < edges_.size(); ++i) {
    if (edges_[i].u == edges_[i - 1].u && edges_[i].v == edges_[i - 1].v) {
      throw DomainError("account graph: duplicate edge");
    }
  }
}

std::size_t AccountGraph::index_of(const std::string& account) const {
  auto it = index_.find(account);
  if (it == index_.end()) throw DomainError("account graph: unknown account " + account);
  return it->second;
}

bool AccountGraph::contains(const std::string& account) const {
  return index_.count(account) > 0;
}

const nn::SparseMatrix& AccountGraph::normalized_adjacency(bool weighted) const {
  auto& slot = weighted ? weighted_ : plain_;
  if (!slot) {
    std::vector<nn::WeightedEdge> e = edges_;
    if (!weighted) {
      for (auto& x : e) x.weight = 1.0;
    }
    slot = std::make_shared<nn::SparseMatrix>(nn::normalized_adjacency(size(), e));
  }
  return *slot;
}

AccountGraph build_account_graph(std::span<const corpus::Transfer> transfers,
                                 const std::vector<std::string>* nodes) {
  std::vector<std::string> accounts;
  if (nodes) {
    accounts = *nodes;
    std::sort(accounts.begin(), accounts.end());
  } else {
    for (const auto& t : transfers) {
      accounts.push_back(t.from);
      accounts.push_back(t.to);
    }
    std::sort(accounts.begin(), accounts.end());
    accounts.erase(std::unique(accounts.begin(), accounts.end()), accounts.end());
  }
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < accounts.size(); ++i) index.emplace(accounts[i], i);

  std::map<std::pair<std::size_t, std::size_t>, double> counts;
  for (const auto& t : transfers) {
    auto a = index.find(t.from), b = index.find(t.to);
    if (a == index.end() || b == index.end() || a->second == b->second) continue;
    const auto key = std::minmax(a->second, b->second);
    counts[{key.first, key.second}] += 1.0;
  }
  std::vector<nn::WeightedEdge> edges;
  edges.reserve(counts.size());
  for (const auto& [key, w] : counts) edges.push_back({key.first, key.second, w});
  return AccountGraph(std::move(accounts), std::move(edges));
}

void write_edges(const std::filesystem::path& path, const AccountGraph& graph) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& e : graph.edges()) {
    out << nlohmann::ordered_json{{"account_u", graph.accounts()[e.u]},
                                  {"account_v", graph.accounts()[e.v]},
                                  {"count", static_cast<std::size_t>(e.weight)}}
               .dump()
        << '\n';
  }
}

void write_nodes(const std::filesystem::path& path, const AccountGraph& graph) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < graph.size(); ++i) j[graph.accounts()[i]] = i;
  out << j.dump() << '\n';
}

AccountGraph read_graph(const std::filesystem::path& nodes,
                        const std::filesystem::path& edges) {
  std::ifstream in_nodes(nodes);
  if (!in_nodes) throw MissingArtifactError(nodes.string());
  std::ifstream in_edges(edges);
  if (!in_edges) throw MissingArtifactError(edges.string());
  const auto table = nlohmann::json::parse(in_nodes);
  std::vector<std::string> accounts(table.size());
  for (const auto& [account, row] : table.items()) {
    const auto r = row.get<std::size_t>();
    if (r >= accounts.size()) throw ParseError(nodes.string() + ": row out of range");
    accounts[r] = account;
  }
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < accounts.size(); ++i) index[accounts[i]] = i;
  auto row_of = [&](const std::string& account) {
    auto it = index.find(account);
    if (it == index.end()) {
      throw ParseError(edges.string() + ": unknown account " + account);
    }
    return it->second;
  };
  std::vector<nn::WeightedEdge> list;
  std::string line;
  while (std::getline(in_edges, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    list.push_back({row_of(j.at("account_u").get<std::string>()),
                    row_of(j.at("account_v").get<std::string>()),
                    j.at("count").get<double>()});
  }
  return AccountGraph(std::move(accounts), std::move(list));
}

Tensor gcn_forward(const nn::SparseMatrix& a_hat, const Tensor& h0, const Tensor& w1,
                   const Tensor& w2) {
  if (h0.dim() != 2 || h0.rows() != a_hat.size()) {
    throw DimensionError("gcn_forward: feature rows do not match the " +
                         std::to_string(a_hat.size()) + "-node adjacency");
  }
  const Tensor h1 = nn::relu(nn::spmm(a_hat, nn::matmul(h0, w1)));
  return nn::spmm(a_hat, nn::matmul(h1, w2));
}

}  // namespace tlmg::aig
