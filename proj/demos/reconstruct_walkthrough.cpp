// End-to-end walkthrough: build a random convolution operator, synthesize a
// signal from a block-sparse code, reconstruct it with one feedforward pass
// and with a few hard-thresholding iterations, and print the errors.

#include <iostream>

#include <convsense/convsense.hpp>

int main() {
  using namespace convsense;

  const int K = 96, M = 32, L = 5, D = 32, k = 10;
  const std::uint64_t seed = 7;

  const auto bank = normalize_rows(random_filter_bank(K, M, L, 1, seed));
  const StructuredOperator op(bank, InputGeometry{D, 1});
  std::cout << "operator: " << op.rows() << " x " << op.cols() << " (" << K
            << " filters, " << op.shifts() << " shifts)\n";

  RngStream stream(seed, 1);
  const ModelSparseSignal z = sample_model_sparse(op.grid(), k, stream);
  const Eigen::VectorXd x = op.adjoint_sparse(z);
  std::cout << "code: " << z.support.size() << " nonzeros, |W^T z| / |z| = "
            << x.norm() / z.coeffs.norm() << "\n";

  const PoolingLayout layout(op.grid(), PoolingGeometry::full_block());
  const auto once = feedforward_reconstruct(op, x, k, layout, Upsampling::kSwitches);
  std::cout << "one pass:   relative error " << (once.x_hat - x).norm() / x.norm() << "\n";

  IhtConfig config;
  config.sparsity = k;
  config.max_iters = 10;
  const auto iterated = model_iht(op, x, config);
  std::cout << "ten passes: relative error " << iterated.residual_history.back() << "\n";
  return 0;
}
