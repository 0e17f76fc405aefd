#pragma once

// Thin RAII layer over FFTW. Plans are created once (under a global lock,
// since the FFTW planner is not reentrant) and then executed through the
// new-array interface, which is safe to call from many threads at once.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>

namespace kslyap::detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};

/// SIMD-aligned scratch array; all plan executions go through these so the
/// alignment always matches the arrays the plans were created with.
template <class T>
class AlignedBuffer {
 public:
  explicit AlignedBuffer(std::size_t n)
      : size_(n), data_(static_cast<T*>(fftw_malloc(sizeof(T) * (n ? n : 1)))) {
    if (!data_) throw std::bad_alloc();
  }
  T* data() noexcept { return data_.get(); }
  const T* data() const noexcept { return data_.get(); }
  std::size_t size() const noexcept { return size_; }
  T& operator[](std::size_t i) noexcept { return data_.get()[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_.get()[i]; }

 private:
  std::size_t size_;
  std::unique_ptr<T, FftwFree> data_;
};

using ComplexBuffer = AlignedBuffer<fftw_complex>;
using RealBuffer = AlignedBuffer<double>;

struct PlanDeleter {
  void operator()(fftw_plan p) const noexcept {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(p);
  }
};
using PlanHandle = std::unique_ptr<std::remove_pointer_t<fftw_plan>, PlanDeleter>;

/// Real <-> half-complex transforms of length n (unnormalized, FFTW sign
/// convention: forward uses exp(-i...)). FFTW_ESTIMATE keeps the chosen
/// algorithm, and therefore the rounding, identical from run to run.
class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    RealBuffer r(n);
    ComplexBuffer c(n / 2 + 1);
    std::lock_guard lock(fftw_planner_mutex());
    const int len = static_cast<int>(n);
    forward_.reset(fftw_plan_dft_r2c_1d(len, r.data(), c.data(), FFTW_ESTIMATE));
    backward_.reset(fftw_plan_dft_c2r_1d(len, c.data(), r.data(), FFTW_ESTIMATE));
  }
  std::size_t size() const noexcept { return n_; }
  std::size_t spectrum_size() const noexcept { return n_ / 2 + 1; }

  void forward(RealBuffer& in, ComplexBuffer& out) const {
    fftw_execute_dft_r2c(forward_.get(), in.data(), out.data());
  }
  /// Destroys `in`.
  void backward(ComplexBuffer& in, RealBuffer& out) const {
    fftw_execute_dft_c2r(backward_.get(), in.data(), out.data());
  }

 private:
  std::size_t n_;
  PlanHandle forward_;
  PlanHandle backward_;
};

/// Unnormalized DST-I (FFTW RODFT00): y_k = 2 sum_j x_j sin(pi (j+1)(k+1)/(n+1)).
class SineTransform {
 public:
  explicit SineTransform(std::size_t n) : n_(n) {
    RealBuffer a(n), b(n);
    std::lock_guard lock(fftw_planner_mutex());
    plan_.reset(fftw_plan_r2r_1d(static_cast<int>(n), a.data(), b.data(), FFTW_RODFT00,
                                 FFTW_ESTIMATE));
  }
  std::size_t size() const noexcept { return n_; }
  void execute(RealBuffer& in, RealBuffer& out) const {
    fftw_execute_r2r(plan_.get(), in.data(), out.data());
  }

 private:
  std::size_t n_;
  PlanHandle plan_;
};

}  // namespace kslyap::detail
