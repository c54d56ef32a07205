#include "screenleak/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <stdexcept>
#include <tuple>

namespace screenleak::fft {
namespace {

enum class Kind { kR2C, kC2R, kC2CBackward };

// FFTW planning is not thread-safe; execution with the new-array interface is.
// Plans are created once per (kind, size) and never mutated afterwards.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(Kind kind, std::size_t n) {
    std::lock_guard<std::mutex> lock(mu_);
    auto key = std::make_tuple(kind, n);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;

    const int len = static_cast<int>(n);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fftw_plan plan = nullptr;
    switch (kind) {
      case Kind::kR2C: {
        auto* in = fftw_alloc_real(n);
        auto* out = fftw_alloc_complex(n / 2 + 1);
        plan = fftw_plan_dft_r2c_1d(len, in, out, flags);
        fftw_free(in);
        fftw_free(out);
        break;
      }
      case Kind::kC2R: {
        auto* in = fftw_alloc_complex(n / 2 + 1);
        auto* out = fftw_alloc_real(n);
        plan = fftw_plan_dft_c2r_1d(len, in, out, flags);
        fftw_free(in);
        fftw_free(out);
        break;
      }
      case Kind::kC2CBackward: {
        auto* in = fftw_alloc_complex(n);
        auto* out = fftw_alloc_complex(n);
        plan = fftw_plan_dft_1d(len, in, out, FFTW_BACKWARD, flags);
        fftw_free(in);
        fftw_free(out);
        break;
      }
    }
    if (plan == nullptr) throw std::runtime_error("FFTW planning failed");
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  std::mutex mu_;
  std::map<std::tuple<Kind, std::size_t>, fftw_plan> plans_;
};

}  // namespace

std::vector<Complex> rfft(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<Complex> out(n / 2 + 1);
  if (n == 0) return {};
  std::vector<double> in(x.begin(), x.end());  // FFTW may scribble on its input
  fftw_execute_dft_r2c(PlanCache::instance().get(Kind::kR2C, n), in.data(),
                       reinterpret_cast<fftw_complex*>(out.data()));
  return out;
}

std::vector<double> irfft(std::span<const Complex> spectrum, std::size_t n) {
  if (n == 0) return {};
  if (spectrum.size() != n / 2 + 1) throw std::invalid_argument("irfft: spectrum size mismatch");
  std::vector<Complex> in(spectrum.begin(), spectrum.end());
  std::vector<double> out(n);
  fftw_execute_dft_c2r(PlanCache::instance().get(Kind::kC2R, n), reinterpret_cast<fftw_complex*>(in.data()),
                       out.data());
  const double scale = 1.0 / static_cast<double>(n);
  for (double& v : out) v *= scale;
  return out;
}

std::vector<Complex> ifft(std::span<const Complex> spectrum) {
  const std::size_t n = spectrum.size();
  if (n == 0) return {};
  std::vector<Complex> in(spectrum.begin(), spectrum.end());
  std::vector<Complex> out(n);
  fftw_execute_dft(PlanCache::instance().get(Kind::kC2CBackward, n), reinterpret_cast<fftw_complex*>(in.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
  const double scale = 1.0 / static_cast<double>(n);
  for (auto& v : out) v *= scale;
  return out;
}

std::size_t fast_size(std::size_t n) {
  if (n <= 1) return 1;
  for (std::size_t m = n;; ++m) {
    std::size_t r = m;
    for (std::size_t p : {2u, 3u, 5u, 7u}) {
      while (r % p == 0) r /= p;
    }
    if (r == 1) return m;
  }
}

}  // namespace screenleak::fft
