#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nrl/tensor.hpp"

namespace nrl {

// Trainable parameter living outside any single compute graph.
struct Param {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool grad_ready = false;

  Param() = default;
  Param(std::string n, std::vector<std::size_t> s)
      : name(std::move(n)),
        shape(std::move(s)),
        value(shape_size(shape), 0.0),
        grad(shape_size(shape), 0.0) {}
  std::size_t size() const { return value.size(); }
};

// Batchnorm running statistics, updated as a side effect of train-mode
// forward passes and consumed in eval mode.
struct BnBuffer {
  std::string name;
  std::vector<double> running_mean;
  std::vector<double> running_var;

  BnBuffer() = default;
  BnBuffer(std::string n, std::size_t channels)
      : name(std::move(n)),
        running_mean(channels, 0.0),
        running_var(channels, 1.0) {}
};

enum class NormMode { unset, train, eval };

// Reverse-mode tape. Nodes are recorded in topological order by
// construction; backward() visits them in exact reverse order.
class Graph {
 public:
  int input(Tensor t);
  int param(Param& p);

  int add(int a, int b);  // same shape, or (n,d) + (d,) row broadcast
  int mul(int a, int b);
  int relu(int a);
  int scalar_mul(int a, double s);
  int matmul(int a, int b);
  int reshape(int a, std::vector<std::size_t> new_shape);
  int concat_batch(int a, int b);
  int slice_rows(int a, std::size_t begin, std::size_t end);
  int l2_normalize_rows(int a);
  int global_avg_pool(int a);
  int conv2d(int x, int w, std::size_t stride, std::size_t pad);
  int batchnorm2d(int x, int gamma, int beta, BnBuffer& buf, NormMode mode,
                  double momentum);
  int sum(int a);
  int softmax_cross_entropy(int logits, std::vector<std::size_t> targets);
  int nt_xent(int za, int zb, double tau);
  int barlow_twins(int za, int zb, double lambda);

  // Fills grad slots by reverse accumulation; loss must be scalar.
  // May be called once per graph.
  void backward(int loss);

  const Tensor& value(int id) const { return nodes_[id].value; }
  std::span<const double> grad(int id) const;

  std::vector<std::string> diagnostics;

 private:
  struct Node {
    Tensor value;
    std::vector<double> grad;
    std::function<void(Graph&, int)> backprop;
    Param* bound = nullptr;
  };

  int emit(Tensor value, std::function<void(Graph&, int)> backprop,
           const char* opname);
  double* grad_buf(int id);
  bool has_grad(int id) const { return !nodes_[id].grad.empty(); }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace nrl
