#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace twpa {

/// General band matrix in LAPACK column-major band storage with room for the LU fill-in.
/// Factorization is partial-pivoted (xGBTRF); the factored matrix can be reused for
/// any number of right-hand sides.
template <typename T>
class BandedMatrix {
public:
    BandedMatrix(std::size_t n, std::size_t lower, std::size_t upper);

    [[nodiscard]] std::size_t size() const noexcept { return n_; }
    [[nodiscard]] std::size_t lower() const noexcept { return kl_; }
    [[nodiscard]] std::size_t upper() const noexcept { return ku_; }

    /// Element access for |i - j| inside the band. Not valid after factorize().
    T& operator()(std::size_t i, std::size_t j) { return ab_[j * ldab_ + (kl_ + ku_ + i - j)]; }
    T operator()(std::size_t i, std::size_t j) const {
        return ab_[j * ldab_ + (kl_ + ku_ + i - j)];
    }
    [[nodiscard]] bool in_band(std::size_t i, std::size_t j) const noexcept {
        return (i <= j + kl_) && (j <= i + ku_);
    }

    void set_zero();
    /// y = A x, using the unfactored entries.
    void multiply(std::span<const T> x, std::span<T> y) const;

    void factorize();
    /// Solves in place; b holds nrhs column-major vectors of length n.
    void solve(std::span<T> b, std::size_t nrhs = 1) const;
    [[nodiscard]] bool factorized() const noexcept { return factorized_; }

private:
    std::size_t n_;
    std::size_t kl_;
    std::size_t ku_;
    std::size_t ldab_;
    std::vector<T> ab_;
    std::vector<int> ipiv_;
    bool factorized_ = false;
};

class SingularMatrixError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

extern template class BandedMatrix<double>;
extern template class BandedMatrix<std::complex<double>>;

}  // namespace twpa
