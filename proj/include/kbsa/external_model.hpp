#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "kbsa/models.hpp"

namespace kbsa {

struct ExternalModelOptions {
  std::vector<std::string> command;  // argv; command[0] is looked up in PATH
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  std::size_t batch_size = 256;
  double timeout_seconds = 30.0;  // max silence while waiting for the child
};

// A model evaluated by a child process speaking newline-delimited JSON on
// stdin/stdout:
//
//   child  -> {"ready":true}                       once, at start
//   parent -> {"id":k,"x":[...],"theta":t}        one line per point
//   child  -> {"id":k,"y":[...]}                   one line per request
//
// Ids start at 1 and increase strictly per connection. Responses may come
// in any order; duplicates and unknown ids are dropped. At most one batch is
// outstanding per connection. A connection that failed is discarded and a
// fresh child is started on the next call.
class ExternalModel final : public Model {
 public:
  explicit ExternalModel(ExternalModelOptions options);
  ~ExternalModel() override;

  std::size_t input_dim() const override { return options_.input_dim; }
  std::size_t output_dim() const override { return options_.output_dim; }
  std::string name() const override { return "external"; }

  void evaluate_batch(const PointSet& xs, std::optional<double> theta, std::span<double> ys) const override;

  // Number of child processes started so far.
  std::size_t spawned() const;

  class Connection;

 protected:
  void compute(std::span<const double> x, std::optional<double> theta, std::span<double> y) const override;

 private:
  std::unique_ptr<Connection> acquire() const;
  void release(std::unique_ptr<Connection> c) const;
  void run(const PointSet& xs, std::optional<double> theta, std::span<double> ys) const;

  ExternalModelOptions options_;
  mutable std::mutex mutex_;
  mutable std::vector<std::unique_ptr<Connection>> idle_;
  mutable std::size_t spawned_ = 0;
};

}  // namespace kbsa
