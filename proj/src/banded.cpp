#include "twpa/banded.hpp"

#include <algorithm>
#include <complex>
#include <string>

#include <lapacke.h>

namespace twpa {

template <typename T>
BandedMatrix<T>::BandedMatrix(std::size_t n, std::size_t lower, std::size_t upper)
    : n_(n), kl_(lower), ku_(upper), ldab_(2 * lower + upper + 1), ab_(ldab_ * n), ipiv_(n) {}

template <typename T>
void BandedMatrix<T>::set_zero() {
    std::fill(ab_.begin(), ab_.end(), T{});
    factorized_ = false;
}

template <typename T>
void BandedMatrix<T>::multiply(std::span<const T> x, std::span<T> y) const {
    for (std::size_t i = 0; i < n_; ++i) {
        const std::size_t j0 = i > kl_ ? i - kl_ : 0;
        const std::size_t j1 = std::min(n_ - 1, i + ku_);
        T acc{};
        for (std::size_t j = j0; j <= j1; ++j) {
            acc += (*this)(i, j) * x[j];
        }
        y[i] = acc;
    }
}

namespace {

lapack_int gbtrf(lapack_int n, lapack_int kl, lapack_int ku, double* ab, lapack_int ldab,
                 lapack_int* ipiv) {
    return LAPACKE_dgbtrf(LAPACK_COL_MAJOR, n, n, kl, ku, ab, ldab, ipiv);
}

lapack_int gbtrf(lapack_int n, lapack_int kl, lapack_int ku, std::complex<double>* ab,
                 lapack_int ldab, lapack_int* ipiv) {
    return LAPACKE_zgbtrf(LAPACK_COL_MAJOR, n, n, kl, ku,
                          reinterpret_cast<lapack_complex_double*>(ab), ldab, ipiv);
}

lapack_int gbtrs(lapack_int n, lapack_int kl, lapack_int ku, lapack_int nrhs, const double* ab,
                 lapack_int ldab, const lapack_int* ipiv, double* b) {
    return LAPACKE_dgbtrs(LAPACK_COL_MAJOR, 'N', n, kl, ku, nrhs, ab, ldab, ipiv, b, n);
}

lapack_int gbtrs(lapack_int n, lapack_int kl, lapack_int ku, lapack_int nrhs,
                 const std::complex<double>* ab, lapack_int ldab, const lapack_int* ipiv,
                 std::complex<double>* b) {
    return LAPACKE_zgbtrs(LAPACK_COL_MAJOR, 'N', n, kl, ku, nrhs,
                          reinterpret_cast<const lapack_complex_double*>(ab), ldab, ipiv,
                          reinterpret_cast<lapack_complex_double*>(b), n);
}

}  // namespace

template <typename T>
void BandedMatrix<T>::factorize() {
    const lapack_int info =
        gbtrf(static_cast<lapack_int>(n_), static_cast<lapack_int>(kl_),
              static_cast<lapack_int>(ku_), ab_.data(), static_cast<lapack_int>(ldab_),
              ipiv_.data());
    if (info != 0) {
        throw SingularMatrixError("banded LU failed, info = " + std::to_string(info));
    }
    factorized_ = true;
}

template <typename T>
void BandedMatrix<T>::solve(std::span<T> b, std::size_t nrhs) const {
    if (!factorized_) {
        throw std::logic_error("solve() before factorize()");
    }
    const lapack_int info =
        gbtrs(static_cast<lapack_int>(n_), static_cast<lapack_int>(kl_),
              static_cast<lapack_int>(ku_), static_cast<lapack_int>(nrhs), ab_.data(),
              static_cast<lapack_int>(ldab_), ipiv_.data(), b.data());
    if (info != 0) {
        throw SingularMatrixError("banded solve failed, info = " + std::to_string(info));
    }
}

template class BandedMatrix<double>;
template class BandedMatrix<std::complex<double>>;

}  // namespace twpa
