#include "cso/gemm.hpp"

#include <algorithm>
#include <cstring>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cso::nn {

namespace {

// Register micro-tile: MR rows of A against an NR-wide column panel of B,
// with compile-time bounds so the accumulators live in vector registers.
// NR is sized at 128 bytes per row (one f32 tile spans 8x32).
template <typename T>
constexpr int kNR = 128 / static_cast<int>(sizeof(T));
constexpr int kMR = 8;

template <typename T>
void kernel_full(int k, const T* __restrict a, int lda, const T* __restrict b,
                 int ldb, T* __restrict c, int ldc, bool accumulate) {
    constexpr int NR = kNR<T>;
    T acc[kMR][NR] = {};
    for (int p = 0; p < k; ++p) {
        const T* __restrict brow = b + static_cast<size_t>(p) * ldb;
        for (int i = 0; i < kMR; ++i) {
            const T av = a[static_cast<size_t>(i) * lda + p];
#pragma omp simd
            for (int j = 0; j < NR; ++j) acc[i][j] += av * brow[j];
        }
    }
    for (int i = 0; i < kMR; ++i) {
        T* crow = c + static_cast<size_t>(i) * ldc;
        if (accumulate) {
#pragma omp simd
            for (int j = 0; j < NR; ++j) crow[j] += acc[i][j];
        } else {
#pragma omp simd
            for (int j = 0; j < NR; ++j) crow[j] = acc[i][j];
        }
    }
}

// Edge tile with runtime bounds; hit only on the ragged borders.
template <typename T>
void kernel_edge(int mr, int nr, int k, const T* __restrict a, int lda,
                 const T* __restrict b, int ldb, T* __restrict c, int ldc,
                 bool accumulate) {
    constexpr int NR = kNR<T>;
    T acc[kMR][NR];
    for (int i = 0; i < mr; ++i)
        for (int j = 0; j < nr; ++j) acc[i][j] = T(0);
    for (int p = 0; p < k; ++p) {
        const T* brow = b + static_cast<size_t>(p) * ldb;
        for (int i = 0; i < mr; ++i) {
            const T av = a[static_cast<size_t>(i) * lda + p];
            for (int j = 0; j < nr; ++j) acc[i][j] += av * brow[j];
        }
    }
    for (int i = 0; i < mr; ++i) {
        T* crow = c + static_cast<size_t>(i) * ldc;
        if (accumulate)
            for (int j = 0; j < nr; ++j) crow[j] += acc[i][j];
        else
            for (int j = 0; j < nr; ++j) crow[j] = acc[i][j];
    }
}

}  // namespace

template <typename T>
void gemm_nn(int m, int n, int k, const T* a, int lda, const T* b, int ldb,
             T* c, int ldc, bool accumulate) {
    constexpr int NR = kNR<T>;
    const int ntiles = (n + NR - 1) / NR;
    const long long work = 2LL * m * n * k;

    // Column panels are the parallel unit; sweeping all of A per panel keeps
    // the B panel hot across row blocks.
#pragma omp parallel for schedule(static) if (work > 1 << 18)
    for (int nt = 0; nt < ntiles; ++nt) {
        const int j0 = nt * NR;
        const int nr = std::min(NR, n - j0);
        int i0 = 0;
        if (nr == NR) {
            for (; i0 + kMR <= m; i0 += kMR)
                kernel_full(k, a + static_cast<size_t>(i0) * lda, lda, b + j0, ldb,
                            c + static_cast<size_t>(i0) * ldc + j0, ldc, accumulate);
        }
        for (; i0 < m; i0 += kMR)
            kernel_edge(std::min(kMR, m - i0), nr, k, a + static_cast<size_t>(i0) * lda,
                        lda, b + j0, ldb, c + static_cast<size_t>(i0) * ldc + j0, ldc,
                        accumulate);
    }
}

template <typename T>
void gemm_nt(int m, int n, int k, const T* a, int lda, const T* b, int ldb,
             T* c, int ldc, bool accumulate) {
    constexpr int TI = 4, TJ = 8;
    const int itiles = (m + TI - 1) / TI;
    const int jtiles = (n + TJ - 1) / TJ;
    const long long work = 2LL * m * n * k;

#pragma omp parallel for collapse(2) schedule(static) if (work > 1 << 18)
    for (int it = 0; it < itiles; ++it) {
        for (int jt = 0; jt < jtiles; ++jt) {
            const int i0 = it * TI, j0 = jt * TJ;
            const int ilim = std::min(TI, m - i0), jlim = std::min(TJ, n - j0);
            for (int i = 0; i < ilim; ++i) {
                const T* arow = a + static_cast<size_t>(i0 + i) * lda;
                for (int j = 0; j < jlim; ++j) {
                    const T* brow = b + static_cast<size_t>(j0 + j) * ldb;
                    T s = T(0);
#pragma omp simd reduction(+ : s)
                    for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
                    T& dst = c[static_cast<size_t>(i0 + i) * ldc + j0 + j];
                    dst = accumulate ? dst + s : s;
                }
            }
        }
    }
}

template <typename T>
void gemm_tn(int m, int n, int k, const T* a, int lda, const T* b, int ldb,
             T* c, int ldc, bool accumulate) {
    // A is (k x m); transpose into a scratch (m x k) and reuse gemm_nn.
    std::vector<T> at(static_cast<size_t>(m) * k);
    for (int p = 0; p < k; ++p)
        for (int i = 0; i < m; ++i)
            at[static_cast<size_t>(i) * k + p] = a[static_cast<size_t>(p) * lda + i];
    gemm_nn(m, n, k, at.data(), k, b, ldb, c, ldc, accumulate);
}

template void gemm_nn<float>(int, int, int, const float*, int, const float*, int, float*, int, bool);
template void gemm_nn<double>(int, int, int, const double*, int, const double*, int, double*, int, bool);
template void gemm_nt<float>(int, int, int, const float*, int, const float*, int, float*, int, bool);
template void gemm_nt<double>(int, int, int, const double*, int, const double*, int, double*, int, bool);
template void gemm_tn<float>(int, int, int, const float*, int, const float*, int, float*, int, bool);
template void gemm_tn<double>(int, int, int, const double*, int, const double*, int, double*, int, bool);

}  // namespace cso::nn
