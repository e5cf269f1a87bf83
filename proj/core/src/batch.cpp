#include "ccdd/batch.hpp"

#include <algorithm>
#include <cmath>

#include "ccdd/error.hpp"

namespace ccdd {

TokenBatch TokenBatch::slice(int first, int count) const {
  if (first < 0 || count < 0 || first + count > batch_) {
    throw InputError("TokenBatch::slice out of range");
  }
  TokenBatch out(count, length_);
  std::copy_n(ids_.begin() + static_cast<std::ptrdiff_t>(first) * length_,
              static_cast<std::size_t>(count) * length_, out.ids_.begin());
  return out;
}

bool Tensor3::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Tensor3 Tensor3::slice(int first, int count) const {
  if (first < 0 || count < 0 || first + count > batch_) {
    throw InputError("Tensor3::slice out of range");
  }
  Tensor3 out(count, length_, channels_);
  const std::size_t stride = static_cast<std::size_t>(length_) * channels_;
  std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(first * stride),
              count * stride, out.data_.begin());
  return out;
}

}  // namespace ccdd
