#ifndef SIGCTL_H
#define SIGCTL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SigctlStaticKernel {
  SIGCTL_STATIC_KERNEL_LINEAR = 0,
  SIGCTL_STATIC_KERNEL_RBF = 1,
} SigctlStaticKernel;

typedef enum SigctlStatus {
  SIGCTL_STATUS_OK = 0,
  SIGCTL_STATUS_NULL_POINTER = 1,
  SIGCTL_STATUS_INVALID_INPUT = 2,
  SIGCTL_STATUS_DIMENSION_MISMATCH = 3,
  SIGCTL_STATUS_NON_FINITE = 4,
  SIGCTL_STATUS_BUFFER_TOO_SMALL = 5,
  SIGCTL_STATUS_INTERNAL = 6,
  SIGCTL_STATUS_PANIC = 7,
} SigctlStatus;

// Piecewise-linear path.
typedef struct SigctlPath SigctlPath;

// Truncated tensor (a signature or a product of signatures).
typedef struct SigctlTensor SigctlTensor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. Valid until the
// next failing call on the same thread.
const char *sigctl_last_error(void);

// Creates a path from `n_points * dim` row-major coordinates.
enum SigctlStatus sigctl_path_new(const double *points,
                                  size_t n_points,
                                  size_t dim,
                                  struct SigctlPath **out);

void sigctl_path_free(struct SigctlPath *path);

// Number of nodes, or 0 for a null handle.
size_t sigctl_path_len(const struct SigctlPath *path);

// Dimension, or 0 for a null handle.
size_t sigctl_path_dim(const struct SigctlPath *path);

// Signature truncated at `depth`.
enum SigctlStatus sigctl_path_signature(const struct SigctlPath *path,
                                        size_t depth,
                                        struct SigctlTensor **out);

void sigctl_tensor_free(struct SigctlTensor *tensor);

// Number of coefficients including level 0, or 0 for a null handle.
size_t sigctl_tensor_len(const struct SigctlTensor *tensor);

size_t sigctl_tensor_dim(const struct SigctlTensor *tensor);

size_t sigctl_tensor_depth(const struct SigctlTensor *tensor);

// Copies the coefficients, level by level in row-major word order, into
// `buf`, which must hold `sigctl_tensor_len` values.
enum SigctlStatus sigctl_tensor_copy(const struct SigctlTensor *tensor,
                                     double *buf,
                                     size_t buf_len);

// Truncated tensor product `a ⊗ b`.
enum SigctlStatus sigctl_tensor_product(const struct SigctlTensor *a,
                                        const struct SigctlTensor *b,
                                        struct SigctlTensor **out);

// Squared Euclidean distance between coefficient vectors.
enum SigctlStatus sigctl_tensor_distance_squared(const struct SigctlTensor *a,
                                                 const struct SigctlTensor *b,
                                                 double *out);

// Untruncated signature kernel by the PDE solver. `bandwidth` is ignored for
// the linear static kernel.
enum SigctlStatus sigctl_signature_kernel(const struct SigctlPath *x,
                                          const struct SigctlPath *y,
                                          enum SigctlStaticKernel static_kernel,
                                          double bandwidth,
                                          uint32_t dyadic_order,
                                          double *out);

// Library version as a static NUL-terminated string.
const char *sigctl_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SIGCTL_H */
