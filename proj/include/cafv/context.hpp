#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cafv/graph.hpp"
#include "cafv/param_store.hpp"
#include "cafv/tensor.hpp"

namespace cafv {

// Signed intensity difference (m/s) between a translation's source and
// target class.
struct ContextInterval {
  int delta = 0;
};

inline ContextInterval reverse(ContextInterval c) { return ContextInterval{-c.delta}; }

enum class EmbeddingMode { OneHot, LearnedTable };

const char* embedding_mode_name(EmbeddingMode m);
EmbeddingMode embedding_mode_from_name(const std::string& name);

// Maps an allowed interval to a fixed-width vector. One-hot mode emits an
// indicator over the interval set; learned mode looks up a trainable table
// row (the table itself lives in a ParamStore under `table_param`).
class ContextEmbedding {
 public:
  static ContextEmbedding one_hot(std::vector<int> interval_set);
  static ContextEmbedding learned_table(std::vector<int> interval_set, std::size_t dim,
                                        std::string table_param = "ctx.table");

  EmbeddingMode mode() const { return mode_; }
  std::size_t dim() const { return dim_; }
  const std::vector<int>& interval_set() const { return interval_set_; }
  const std::string& table_param() const { return table_param_; }

  // Position of the interval inside the sorted set; ValidationError if the
  // delta is not an allowed interval.
  std::size_t index_of(ContextInterval c) const;

  // Current embedding vector, shape [dim].
  Tensor embed(const ParamStore& params, ContextInterval c) const;

  // Embedding as a graph node of shape [1, dim]; differentiable w.r.t. the
  // table in learned mode.
  NodeId embed_node(Graph& g, ContextInterval c) const;

 private:
  ContextEmbedding() = default;

  EmbeddingMode mode_ = EmbeddingMode::OneHot;
  std::vector<int> interval_set_;
  std::size_t dim_ = 0;
  std::string table_param_;
};

}  // namespace cafv
