#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iotmon/ingest.hpp"

namespace iotmon {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Stacks instance values row by row.
RowMatrix to_matrix(std::span<const AttributeInstance> instances);

/// Z-score scaling with training mean and (population) standard deviation.
/// Attributes with zero spread scale to 0.
struct Scaler {
    std::vector<std::string> attributes;
    Eigen::VectorXd mean;
    Eigen::VectorXd stddev;

    Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
    RowMatrix apply(const RowMatrix& x) const;
};

Scaler fit_scaler(const RowMatrix& train, std::vector<std::string> attributes = {});

/// Principal axes of the scaled training data. All axes are kept so the
/// transform can be inverted; only the first `retained` are used to project.
struct Projector {
    RowMatrix components;            // row i = i-th principal direction
    Eigen::VectorXd explained_ratio;  // non-increasing, sums to 1
    std::size_t retained = 0;

    Eigen::VectorXd project(const Eigen::VectorXd& x) const;
    RowMatrix project(const RowMatrix& x) const;
    /// Maps retained coordinates back to attribute space.
    Eigen::VectorXd reconstruct(const Eigen::VectorXd& z) const;
};

/// Eigendecomposition of the sample covariance. `retained` is the smallest
/// count whose cumulative explained-variance ratio reaches `cumvar_target`.
/// Each axis is signed so that its largest-magnitude coordinate is positive.
Projector fit_pca(const RowMatrix& scaled_train, double cumvar_target = 0.95);

}  // namespace iotmon
