#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace bohm {

using cplx = std::complex<double>;

/// In-place iterative radix-2 FFT for power-of-two lengths.
/// forward: X_k = sum_j x_j exp(-2 pi i jk/n); inverse includes the 1/n.
class Fft {
 public:
  explicit Fft(std::size_t n);

  std::size_t size() const { return n_; }
  void forward(std::span<cplx> data) const { transform(data, false); }
  void inverse(std::span<cplx> data) const;

  /// Shared immutable plan for length n (thread-safe).
  static const Fft& cached(std::size_t n);

 private:
  void transform(std::span<cplx> data, bool inverse) const;

  std::size_t n_;
  std::vector<std::size_t> bitrev_;
  std::vector<cplx> twiddle_;
};

}  // namespace bohm
