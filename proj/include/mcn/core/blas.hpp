#pragma once

#include <cstdint>

#ifdef MCN_HAVE_CBLAS
#include <cblas.h>
#endif

namespace mcn::blas {

/// C(m,n) = alpha * op(A) * op(B) + beta * C, row-major.
/// op(A) is A (m,k) when !ta, else A^T with A stored (k,m); same for B.
inline void gemm(bool ta, bool tb, int m, int n, int k, double alpha, const double* a, const double* b,
                 double beta, double* c) {
#ifdef MCN_HAVE_CBLAS
    const int lda = ta ? m : k;
    const int ldb = tb ? k : n;
    cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m, n, k,
                alpha, a, lda, b, ldb, beta, c, n);
#else
    // Fallback path: blocked i-k-j loop. Correct, slower than a tuned BLAS.
    if (beta == 0.0) {
        for (int64_t i = 0; i < int64_t(m) * n; ++i) c[i] = 0.0;
    } else if (beta != 1.0) {
        for (int64_t i = 0; i < int64_t(m) * n; ++i) c[i] *= beta;
    }
    auto a_at = [&](int i, int p) { return ta ? a[int64_t(p) * m + i] : a[int64_t(i) * k + p]; };
    auto b_at = [&](int p, int j) { return tb ? b[int64_t(j) * k + p] : b[int64_t(p) * n + j]; };
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            const double av = alpha * a_at(i, p);
            if (av == 0.0) continue;
            double* crow = c + int64_t(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * b_at(p, j);
        }
    }
#endif
}

}  // namespace mcn::blas
