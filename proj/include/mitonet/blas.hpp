#pragma once

#include <Eigen/Core>

namespace mito::blas {

/// Row-major GEMM on raw strided buffers: C = alpha * op(A) * op(B) + beta * C.
/// op(A) is m x k, op(B) is k x n; ld* are row strides of the stored matrices.
template <class T>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, T alpha, const T* a, int lda, const T* b, int ldb,
          T beta, T* c, int ldc) {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Stride = Eigen::OuterStride<>;
  using ConstMap = Eigen::Map<const Mat, Eigen::Unaligned, Stride>;
  Eigen::Map<Mat, Eigen::Unaligned, Stride> cm(c, m, n, Stride(ldc));
  if (beta == T{0})
    cm.setZero();
  else if (beta != T{1})
    cm *= beta;
  const ConstMap am(a, trans_a ? k : m, trans_a ? m : k, Stride(lda));
  const ConstMap bm(b, trans_b ? n : k, trans_b ? k : n, Stride(ldb));
  if (!trans_a && !trans_b)
    cm.noalias() += alpha * am * bm;
  else if (!trans_a && trans_b)
    cm.noalias() += alpha * am * bm.transpose();
  else if (trans_a && !trans_b)
    cm.noalias() += alpha * am.transpose() * bm;
  else
    cm.noalias() += alpha * am.transpose() * bm.transpose();
}

}  // namespace mito::blas
