#pragma once

#include <cstddef>

namespace crowd::kernels {

// The dense kernels come in two builds: a serial reference and an OpenMP
// version parallelized over independent output rows. Because no kernel
// reduces across threads, the OpenMP results are bit-identical to the serial
// ones for any thread count; training trajectories do not depend on the mode.
enum class Mode { serial, openmp };

Mode active_mode();
void set_mode(Mode m);
bool openmp_compiled();
int openmp_threads();

namespace serial {
// C[n,m] = A[n,k] B[k,m]
void matmul(const double* a, const double* b, double* c, std::size_t n,
            std::size_t k, std::size_t m);
// C[k,m] = A[n,k]^T B[n,m]
void matmul_at(const double* a, const double* b, double* c, std::size_t n,
               std::size_t k, std::size_t m);
// C[n,k] = A[n,m] B[k,m]^T
void matmul_bt(const double* a, const double* b, double* c, std::size_t n,
               std::size_t m, std::size_t k);
void add_bias_rows(double* x, const double* bias, std::size_t n,
                   std::size_t m);
void relu(const double* x, double* y, std::size_t n);
void relu_grad(const double* x, const double* gy, double* gx, std::size_t n);
// Row-wise softmax with max subtraction.
void softmax_rows(const double* x, double* y, std::size_t n, std::size_t m);
}  // namespace serial

namespace openmp {
void matmul(const double* a, const double* b, double* c, std::size_t n,
            std::size_t k, std::size_t m);
void matmul_at(const double* a, const double* b, double* c, std::size_t n,
               std::size_t k, std::size_t m);
void matmul_bt(const double* a, const double* b, double* c, std::size_t n,
               std::size_t m, std::size_t k);
void add_bias_rows(double* x, const double* bias, std::size_t n,
                   std::size_t m);
void relu(const double* x, double* y, std::size_t n);
void relu_grad(const double* x, const double* gy, double* gx, std::size_t n);
void softmax_rows(const double* x, double* y, std::size_t n, std::size_t m);
}  // namespace openmp

// Dispatching entry points used by the rest of the library.
void matmul(const double* a, const double* b, double* c, std::size_t n,
            std::size_t k, std::size_t m);
void matmul_at(const double* a, const double* b, double* c, std::size_t n,
               std::size_t k, std::size_t m);
void matmul_bt(const double* a, const double* b, double* c, std::size_t n,
               std::size_t m, std::size_t k);
void add_bias_rows(double* x, const double* bias, std::size_t n,
                   std::size_t m);
void relu(const double* x, double* y, std::size_t n);
void relu_grad(const double* x, const double* gy, double* gx, std::size_t n);
void softmax_rows(const double* x, double* y, std::size_t n, std::size_t m);

}  // namespace crowd::kernels
