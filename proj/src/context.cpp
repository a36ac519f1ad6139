#include "cafv/context.hpp"

#include <algorithm>

#include "cafv/errors.hpp"

namespace cafv {

const char* embedding_mode_name(EmbeddingMode m) {
  return m == EmbeddingMode::OneHot ? "one_hot" : "learned_table";
}

EmbeddingMode embedding_mode_from_name(const std::string& name) {
  if (name == "one_hot") return EmbeddingMode::OneHot;
  if (name == "learned_table") return EmbeddingMode::LearnedTable;
  throw ValidationError("unknown embedding mode '" + name +
                        "' (expected one_hot or learned_table)");
}

namespace {

std::vector<int> checked_interval_set(std::vector<int> set) {
  if (set.empty()) throw ValidationError("interval set must not be empty");
  std::sort(set.begin(), set.end());
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (set[i] == 0) throw ValidationError("interval set must not contain 0");
    if (i > 0 && set[i] == set[i - 1]) {
      throw ValidationError("interval set contains duplicate delta " +
                            std::to_string(set[i]));
    }
  }
  return set;
}

}  // namespace

ContextEmbedding ContextEmbedding::one_hot(std::vector<int> interval_set) {
  ContextEmbedding e;
  e.mode_ = EmbeddingMode::OneHot;
  e.interval_set_ = checked_interval_set(std::move(interval_set));
  e.dim_ = e.interval_set_.size();
  return e;
}

ContextEmbedding ContextEmbedding::learned_table(std::vector<int> interval_set,
                                                 std::size_t dim, std::string table_param) {
  if (dim == 0) throw ValidationError("embedding dim must be positive");
  ContextEmbedding e;
  e.mode_ = EmbeddingMode::LearnedTable;
  e.interval_set_ = checked_interval_set(std::move(interval_set));
  e.dim_ = dim;
  e.table_param_ = std::move(table_param);
  return e;
}

std::size_t ContextEmbedding::index_of(ContextInterval c) const {
  for (std::size_t i = 0; i < interval_set_.size(); ++i) {
    if (interval_set_[i] == c.delta) return i;
  }
  throw ValidationError("context delta " + std::to_string(c.delta) +
                        " is not in the allowed interval set");
}

Tensor ContextEmbedding::embed(const ParamStore& params, ContextInterval c) const {
  const std::size_t idx = index_of(c);
  if (mode_ == EmbeddingMode::OneHot) {
    Tensor out = Tensor::zeros({dim_});
    out.data[idx] = 1.0;
    return out;
  }
  const Tensor& table = params.value(table_param_);
  if (table.rank() != 2 || table.rows() != interval_set_.size() || table.cols() != dim_) {
    throw ShapeError("embedding table '" + table_param_ + "' has shape " +
                     table.shape_str() + ", expected [" +
                     std::to_string(interval_set_.size()) + ", " + std::to_string(dim_) +
                     "]");
  }
  Tensor out = Tensor::zeros({dim_});
  for (std::size_t j = 0; j < dim_; ++j) out.data[j] = table.at(idx, j);
  return out;
}

NodeId ContextEmbedding::embed_node(Graph& g, ContextInterval c) const {
  const std::size_t idx = index_of(c);
  Tensor selector = Tensor::zeros({1, interval_set_.size()});
  selector.data[idx] = 1.0;
  if (mode_ == EmbeddingMode::OneHot) {
    Tensor row = Tensor::zeros({1, dim_});
    row.data[idx] = 1.0;
    return g.constant(std::move(row));
  }
  return g.matmul(g.constant(std::move(selector)), g.param(table_param_));
}

}  // namespace cafv
