#pragma once

// Cache-blocked matrix multiply kernels backing the im2col convolution path.
// Row-major throughout.
//
//   gemm_nn:  C(MxN) = A(MxK) * B(KxN)      [+ C when accumulate]
//   gemm_nt:  C(MxN) = A(MxK) * B(NxK)^T    [+ C when accumulate]
//
// Both are deterministic for a fixed build: the reduction order is fixed in
// the source, so repeated runs produce identical results.

namespace cso::nn {

template <typename T>
void gemm_nn(int m, int n, int k, const T* a, int lda, const T* b, int ldb,
             T* c, int ldc, bool accumulate);

template <typename T>
void gemm_nt(int m, int n, int k, const T* a, int lda, const T* b, int ldb,
             T* c, int ldc, bool accumulate);

// C(MxN) = A(KxM)^T * B(KxN). Materializes the transpose of A internally.
template <typename T>
void gemm_tn(int m, int n, int k, const T* a, int lda, const T* b, int ldb,
             T* c, int ldc, bool accumulate);

}  // namespace cso::nn
