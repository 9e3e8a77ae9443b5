// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 isacsim contributors

#pragma once

#include <Eigen/Dense>
#include <vector>

#include "isac/common.hpp"

namespace isac {

// Dense complex tensor shaped [rx_elements x tx_elements x n_subcarriers].
// Storage is one column-major rx-by-tx block per subcarrier, so per-subcarrier
// matrix views are zero-copy Eigen maps.
class CxTensor {
 public:
  CxTensor() = default;
  CxTensor(int rx, int tx, int nsc) : rx_(rx), tx_(tx), nsc_(nsc) {
    require(rx > 0 && tx > 0 && nsc > 0, "CxTensor: dimensions must be positive");
    data_.assign(static_cast<std::size_t>(rx) * tx * nsc, cxd(0.0, 0.0));
  }

  int rx() const { return rx_; }
  int tx() const { return tx_; }
  int nsc() const { return nsc_; }
  bool empty() const { return data_.empty(); }
  std::size_t size() const { return data_.size(); }

  cxd& at(int r, int t, int k) { return data_[index(r, t, k)]; }
  const cxd& at(int r, int t, int k) const { return data_[index(r, t, k)]; }

  Eigen::Map<Eigen::MatrixXcd> slice(int k) {
    return {data_.data() + static_cast<std::size_t>(k) * rx_ * tx_, rx_, tx_};
  }
  Eigen::Map<const Eigen::MatrixXcd> slice(int k) const {
    return {data_.data() + static_cast<std::size_t>(k) * rx_ * tx_, rx_, tx_};
  }

  cxd* data() { return data_.data(); }
  const cxd* data() const { return data_.data(); }

  double power() const {  // sum |.|^2 over all coefficients
    double p = 0.0;
    for (const cxd& v : data_) p += std::norm(v);
    return p;
  }

  CxTensor& operator+=(const CxTensor& o) {
    require(same_shape(o), "CxTensor::operator+=: shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  CxTensor& operator*=(cxd s) {
    for (cxd& v : data_) v *= s;
    return *this;
  }

  bool same_shape(const CxTensor& o) const {
    return rx_ == o.rx_ && tx_ == o.tx_ && nsc_ == o.nsc_;
  }

 private:
  std::size_t index(int r, int t, int k) const {
    return (static_cast<std::size_t>(k) * tx_ + t) * rx_ + r;
  }

  int rx_ = 0, tx_ = 0, nsc_ = 0;
  std::vector<cxd> data_;
};

inline cxd dot(const CxTensor& a, const CxTensor& b) {
  // <a, b> = sum conj(a_i) b_i; both tensors must have one shape.
  require(a.same_shape(b), "dot: shape mismatch");
  cxd acc(0.0, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    acc += std::conj(a.data()[i]) * b.data()[i];
  return acc;
}

// Keeps every stride-th subcarrier slice. The spatial structure per slice is
// untouched, so optimizations over the decimated tensor transfer to the full
// one with less work.
inline CxTensor decimate_nsc(const CxTensor& t, int stride) {
  require(stride >= 1 && t.nsc() % stride == 0,
          "decimate_nsc: stride must divide the subcarrier count");
  CxTensor out(t.rx(), t.tx(), t.nsc() / stride);
  for (int k = 0; k < out.nsc(); ++k)
    for (int c = 0; c < t.tx(); ++c)
      for (int r = 0; r < t.rx(); ++r)
        out.at(r, c, k) = t.at(r, c, k * stride);
  return out;
}

}  // namespace isac
