#include "lnn/jet.hpp"

#include <cmath>

namespace lnn {

MlpJet::MlpJet(const NetParams& params, int directions, std::vector<std::pair<int, int>> pairs)
    : params_(params), directions_(directions), pairs_(std::move(pairs)) {
  params_.validate();
  if (directions_ < 0) throw InvalidArgument("MlpJet: negative direction count");
  for (auto [a, b] : pairs_)
    if (a < 0 || b < 0 || a >= directions_ || b >= directions_) throw InvalidArgument("MlpJet: pair out of range");
}

void MlpJet::forward(const Mat& x, const std::vector<Mat>& dirs) {
  const int d_in = params_.input_width();
  batch_ = static_cast<int>(x.cols());
  if (x.rows() != d_in) throw InvalidArgument("MlpJet: input rows != network input width");
  if (static_cast<int>(dirs.size()) != directions_) throw InvalidArgument("MlpJet: wrong number of directions");
  const int B = batch_;
  const int S = streams();
  const int K = directions_;

  Mat a0 = Mat::Zero(d_in, static_cast<Eigen::Index>(S) * B);
  a0.middleCols(0, B) = x;
  for (int k = 0; k < K; ++k) {
    if (dirs[k].rows() != d_in || dirs[k].cols() != B) throw InvalidArgument("MlpJet: direction shape mismatch");
    a0.middleCols((1 + k) * B, B) = dirs[k];
  }

  const std::size_t L = params_.layers.size();
  inputs_.assign(L, Mat());
  pre_.assign(L - 1, Mat());
  s1_.assign(L - 1, Mat());
  s2_.assign(L - 1, Mat());
  s3_.assign(L - 1, Mat());
  inputs_[0] = std::move(a0);

  for (std::size_t l = 0; l < L; ++l) {
    const Layer& layer = params_.layers[l];
    Mat z = layer.w * inputs_[l];
    z.middleCols(0, B).colwise() += layer.b;
    if (l + 1 == L) {
      output_ = std::move(z);
      break;
    }
    const Eigen::Index n = z.rows();
    Mat s1(n, B), s2(n, B), s3(n, B);
    Mat a(n, static_cast<Eigen::Index>(S) * B);
    auto z0 = z.middleCols(0, B).array();
    if (params_.activation == Activation::softplus) {
      for (Eigen::Index j = 0; j < B; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
          const double v = z0(i, j);
          const double e = std::exp(-std::abs(v));
          const double s = v >= 0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
          a(i, j) = std::max(v, 0.0) + std::log1p(e);
          s1(i, j) = s;
          s2(i, j) = s * (1.0 - s);
          s3(i, j) = s * (1.0 - s) * (1.0 - 2.0 * s);
        }
      }
    } else {
      a.middleCols(0, B) = z0.max(0.0).matrix();
      s1 = (z0 > 0.0).cast<double>().matrix();
      s2.setZero();
      s3.setZero();
    }
    for (int k = 0; k < K; ++k)
      a.middleCols((1 + k) * B, B) = (s1.array() * z.middleCols((1 + k) * B, B).array()).matrix();
    for (std::size_t p = 0; p < pairs_.size(); ++p) {
      const auto [k1, k2] = pairs_[p];
      const Eigen::Index c = (1 + K + static_cast<Eigen::Index>(p)) * B;
      a.middleCols(c, B) = (s2.array() * z.middleCols((1 + k1) * B, B).array() *
                                z.middleCols((1 + k2) * B, B).array() +
                            s1.array() * z.middleCols(c, B).array())
                               .matrix();
    }
    pre_[l] = std::move(z);
    s1_[l] = std::move(s1);
    s2_[l] = std::move(s2);
    s3_[l] = std::move(s3);
    inputs_[l + 1] = std::move(a);
  }
}

void MlpJet::backward(const Mat& seed, NetParams& grads) const {
  if (seed.rows() != output_.rows() || seed.cols() != output_.cols())
    throw InvalidArgument("MlpJet::backward: seed shape mismatch");
  const int B = batch_;
  const int K = directions_;
  const std::size_t L = params_.layers.size();

  Mat g = seed;
  for (std::size_t l = L; l-- > 0;) {
    const Layer& layer = params_.layers[l];
    grads.layers[l].w.noalias() += g * inputs_[l].transpose();
    grads.layers[l].b += g.middleCols(0, B).rowwise().sum();
    if (l == 0) break;

    // Adjoint of the activation streams of hidden layer l-1.
    const Mat abar = layer.w.transpose() * g;
    const std::size_t h = l - 1;
    const Mat& z = pre_[h];
    const auto s1 = s1_[h].array();
    const auto s2 = s2_[h].array();
    const auto s3 = s3_[h].array();
    Mat gz(z.rows(), z.cols());
    auto blk = [B](auto& m, Eigen::Index s) { return m.middleCols(s * B, B).array(); };

    blk(gz, 0) = blk(abar, 0) * s1;
    for (int k = 0; k < K; ++k) {
      blk(gz, 0) += blk(abar, 1 + k) * s2 * blk(z, 1 + k);
      blk(gz, 1 + k) = blk(abar, 1 + k) * s1;
    }
    for (std::size_t p = 0; p < pairs_.size(); ++p) {
      const auto [k1, k2] = pairs_[p];
      const Eigen::Index c = 1 + K + static_cast<Eigen::Index>(p);
      const auto ab = blk(abar, c);
      blk(gz, 0) += ab * (s3 * blk(z, 1 + k1) * blk(z, 1 + k2) + s2 * blk(z, c));
      blk(gz, 1 + k1) += ab * s2 * blk(z, 1 + k2);
      blk(gz, 1 + k2) += ab * s2 * blk(z, 1 + k1);
      blk(gz, c) = ab * s1;
    }
    g = std::move(gz);
  }
}

}  // namespace lnn
