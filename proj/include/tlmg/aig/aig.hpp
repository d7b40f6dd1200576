#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tlmg/corpus/corpus.hpp"
#include "tlmg/numerics/random.hpp"
#include "tlmg/numerics/sparse.hpp"
#include "tlmg/numerics/tensor.hpp"

namespace tlmg::aig {

/// Undirected account graph; edge weight is the number of transfers between
/// the pair in either direction. Nodes are sorted by account id.
class AccountGraph {
 public:
  AccountGraph() = default;
  AccountGraph(std::vector<std::string> accounts, std::vector<nn::WeightedEdge> edges);

  const std::vector<std::string>& accounts() const { return accounts_; }
  // Sorted by (u, v) with u < v and weight >= 1.
  const std::vector<nn::WeightedEdge>& edges() const { return edges_; }
  std::size_t size() const { return accounts_.size(); }
  // Throws DomainError for an unknown account.
  std::size_t index_of(const std::string& account) const;
  bool contains(const std::string& account) const;

  /// D^-1/2 (A + I) D^-1/2 with A holding counts (weighted) or 1 per edge.
  /// Cached per flag.
  const nn::SparseMatrix& normalized_adjacency(bool weighted) const;

 private:
  std::vector<std::string> accounts_;
  std::map<std::string, std::size_t> index_;
  std::vector<nn::WeightedEdge> edges_;
  mutable std::shared_ptr<nn::SparseMatrix> plain_, weighted_;
};

/// One node per account that sends or receives a transfer. When `nodes` is
/// given, only those accounts become nodes (each must be present) and
/// transfers touching other accounts are dropped. Self-transfers add no edge.
AccountGraph build_account_graph(std::span<const corpus::Transfer> transfers,
                                 const std::vector<std::string>* nodes = nullptr);

// JSON lines {account_u, account_v, count}.
void write_edges(const std::filesystem::path& path, const AccountGraph& graph);
// JSON object {account: row}.
void write_nodes(const std::filesystem::path& path, const AccountGraph& graph);
AccountGraph read_graph(const std::filesystem::path& nodes,
                        const std::filesystem::path& edges);

/// A relu(A H W1) W2 without bias terms.
nn::Tensor gcn_forward(const nn::SparseMatrix& a_hat, const nn::Tensor& h0,
                       const nn::Tensor& w1, const nn::Tensor& w2);

}  // namespace tlmg::aig
