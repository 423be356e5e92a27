#pragma once

#include "lnn/netcore.hpp"

#include <utility>
#include <vector>

namespace lnn {

// Batched forward-mode evaluation of a network along K input directions,
// carrying first directional derivatives for every direction and second
// directional derivatives for a chosen list of direction pairs, followed by a
// reverse pass that turns adjoints of those outputs into parameter gradients.
//
// All quantities are kept as "streams": a matrix of width S*B where S = 1 + K + P
// and B is the batch size. Stream 0 holds values, streams 1..K the tangents,
// streams K+1..K+P the second-order terms. Each stream occupies B consecutive
// columns.
class MlpJet {
 public:
  MlpJet(const NetParams& params, int directions, std::vector<std::pair<int, int>> pairs);

  // x and each direction are d_in x B.
  void forward(const Mat& x, const std::vector<Mat>& dirs);

  int batch() const { return batch_; }
  int streams() const { return 1 + directions_ + static_cast<int>(pairs_.size()); }
  int directions() const { return directions_; }
  const std::vector<std::pair<int, int>>& pairs() const { return pairs_; }

  // Output streams, d_out x B each.
  auto value() const { return output_.middleCols(0, batch_); }
  auto tangent(int k) const { return output_.middleCols((1 + k) * batch_, batch_); }
  auto second(int p) const { return output_.middleCols((1 + directions_ + p) * batch_, batch_); }

  // Zero adjoint seed shaped like the output streams; fill the blocks whose
  // outputs enter the objective, then call backward.
  Mat zero_seed() const { return Mat::Zero(output_.rows(), output_.cols()); }
  auto seed_value(Mat& seed) const { return seed.middleCols(0, batch_); }
  auto seed_tangent(Mat& seed, int k) const { return seed.middleCols((1 + k) * batch_, batch_); }
  auto seed_second(Mat& seed, int p) const { return seed.middleCols((1 + directions_ + p) * batch_, batch_); }

  // Accumulates d(sum seed .* outputs)/d(params) into grads.
  void backward(const Mat& seed, NetParams& grads) const;

 private:
  const NetParams& params_;
  int directions_;
  std::vector<std::pair<int, int>> pairs_;
  int batch_ = 0;
  std::vector<Mat> inputs_;  // stream input to each layer
  std::vector<Mat> pre_;     // stream pre-activations of each hidden layer
  std::vector<Mat> s1_, s2_, s3_;  // activation derivatives at the value stream
  Mat output_;
};

}  // namespace lnn
