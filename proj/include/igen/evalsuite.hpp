#ifndef IGEN_EVALSUITE_HPP_
#define IGEN_EVALSUITE_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "igen/tensor.hpp"

namespace igen {

struct TaskScore {
  std::string task;
  double accuracy = 0.0;
  int64_t n = 0;
};

// Mean over task types with the standard error across task-type means
// (sample standard deviation / sqrt(#tasks)); undefined for one task.
struct AggregateScore {
  double mean = 0.0;
  double sem = 0.0;
  bool sem_defined = false;
  std::vector<TaskScore> per_task;
};

AggregateScore aggregate(std::vector<TaskScore> per_task);

// Deterministic CSV assembly: fixed 6-decimal metric formatting, one
// string per row, no locale involvement.
std::string csv_metric(double v);
std::string csv_join(const std::vector<std::string>& cells);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string serialize() const;
  void write(const std::string& path) const;
};

// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
// Returns eigenvalues in descending order and the matching eigenvectors
// as matrix columns.
std::pair<Tensor, Tensor> sym_eig_jacobi(const Tensor& m);

struct PcaPoint {
  std::string kind;   // training | learned | dummy
  std::string label;
  double pc1 = 0.0;
  double pc2 = 0.0;
  std::string nearest_training;  // for learned points
};

// Exact PCA (covariance eigendecomposition) of concept vectors projected
// to two components. Nearest training neighbours are computed in the
// original space.
std::vector<PcaPoint> pca_project(
    const std::vector<std::pair<std::string, Tensor>>& training,
    const std::vector<std::pair<std::string, Tensor>>& learned,
    const Tensor& dummy);

}  // namespace igen

#endif  // IGEN_EVALSUITE_HPP_
