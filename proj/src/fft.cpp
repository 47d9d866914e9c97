#include "bohm/fft.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "bohm/errors.hpp"

namespace bohm {

Fft::Fft(std::size_t n) : n_(n), bitrev_(n), twiddle_(n / 2) {
  if (n == 0 || (n & (n - 1)) != 0) {
    throw InvalidArgument("FFT length must be a power of two");
  }
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < n) ++bits;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (std::size_t b = 0; b < bits; ++b) {
      if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
    }
    bitrev_[i] = r;
  }
  for (std::size_t k = 0; k < n / 2; ++k) {
    twiddle_[k] = std::polar(1.0, -2.0 * std::numbers::pi *
                                      static_cast<double>(k) /
                                      static_cast<double>(n));
  }
}

void Fft::inverse(std::span<cplx> data) const {
  transform(data, true);
  const double scale = 1.0 / static_cast<double>(n_);
  for (cplx& z : data) z *= scale;
}

void Fft::transform(std::span<cplx> data, bool inverse) const {
  if (data.size() != n_) throw InvalidArgument("FFT length mismatch");
  for (std::size_t i = 0; i < n_; ++i) {
    const std::size_t j = bitrev_[i];
    if (i < j) std::swap(data[i], data[j]);
  }
  for (std::size_t len = 2; len <= n_; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t step = n_ / len;
    for (std::size_t start = 0; start < n_; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        cplx w = twiddle_[k * step];
        if (inverse) w = std::conj(w);
        const cplx u = data[start + k];
        const cplx v = data[start + k + half] * w;
        data[start + k] = u + v;
        data[start + k + half] = u - v;
      }
    }
  }
}

const Fft& Fft::cached(std::size_t n) {
  static std::mutex mutex;
  static std::map<std::size_t, std::unique_ptr<Fft>> plans;
  std::lock_guard lock(mutex);
  auto& slot = plans[n];
  if (!slot) slot = std::make_unique<Fft>(n);
  return *slot;
}

}  // namespace bohm
