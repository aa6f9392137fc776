#include "iotmon/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "iotmon/error.hpp"

namespace iotmon {

RowMatrix to_matrix(std::span<const AttributeInstance> instances) {
    if (instances.empty()) return RowMatrix(0, 0);
    const auto cols = static_cast<Eigen::Index>(instances.front().values.size());
    RowMatrix m(static_cast<Eigen::Index>(instances.size()), cols);
    for (std::size_t i = 0; i < instances.size(); ++i) {
        if (static_cast<Eigen::Index>(instances[i].values.size()) != cols)
            throw Error("preprocess", "instances have different attribute counts");
        m.row(static_cast<Eigen::Index>(i)) =
            Eigen::Map<const Eigen::RowVectorXd>(instances[i].values.data(), cols);
    }
    return m;
}

Eigen::VectorXd Scaler::apply(const Eigen::VectorXd& x) const {
    if (x.size() != mean.size()) throw Error("preprocess", "scaler dimension mismatch");
    Eigen::VectorXd out(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = stddev[i] > 0.0 ? (x[i] - mean[i]) / stddev[i] : 0.0;
    return out;
}

RowMatrix Scaler::apply(const RowMatrix& x) const {
    if (x.cols() != mean.size()) throw Error("preprocess", "scaler dimension mismatch");
    RowMatrix out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r)
        for (Eigen::Index c = 0; c < x.cols(); ++c)
            out(r, c) = stddev[c] > 0.0 ? (x(r, c) - mean[c]) / stddev[c] : 0.0;
    return out;
}

Scaler fit_scaler(const RowMatrix& train, std::vector<std::string> attributes) {
    if (train.rows() < 2) throw Error("preprocess", "need at least 2 training instances to fit a scaler");
    if (!attributes.empty() && static_cast<Eigen::Index>(attributes.size()) != train.cols())
        throw Error("preprocess", "attribute-name count does not match data width");
    Scaler s;
    s.attributes = std::move(attributes);
    const double n = static_cast<double>(train.rows());
    s.mean = train.colwise().sum().transpose() / n;
    s.stddev.resize(train.cols());
    for (Eigen::Index c = 0; c < train.cols(); ++c) {
        const double var = (train.col(c).array() - s.mean[c]).square().sum() / n;
        s.stddev[c] = std::sqrt(var);
    }
    return s;
}

Eigen::VectorXd Projector::project(const Eigen::VectorXd& x) const {
    if (x.size() != components.cols()) throw Error("preprocess", "projector dimension mismatch");
    return components.topRows(static_cast<Eigen::Index>(retained)) * x;
}

RowMatrix Projector::project(const RowMatrix& x) const {
    if (x.cols() != components.cols()) throw Error("preprocess", "projector dimension mismatch");
    return x * components.topRows(static_cast<Eigen::Index>(retained)).transpose();
}

Eigen::VectorXd Projector::reconstruct(const Eigen::VectorXd& z) const {
    if (z.size() != static_cast<Eigen::Index>(retained)) throw Error("preprocess", "projector dimension mismatch");
    return components.topRows(static_cast<Eigen::Index>(retained)).transpose() * z;
}

Projector fit_pca(const RowMatrix& scaled_train, double cumvar_target) {
    if (!(cumvar_target > 0.0 && cumvar_target <= 1.0))
        throw Error("preprocess", "cumulative-variance target must lie in (0, 1]");
    if (scaled_train.rows() < 2 || scaled_train.cols() < 1)
        throw Error("preprocess", "need at least 2 instances and 1 attribute for PCA");

    const Eigen::Index p = scaled_train.cols();
    const Eigen::RowVectorXd mean = scaled_train.colwise().mean();
    const Eigen::MatrixXd centered = scaled_train.rowwise() - mean;
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(scaled_train.rows() - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw Error("preprocess", "covariance eigendecomposition failed");

    // Eigen returns ascending eigenvalues; reverse to descending.
    Eigen::VectorXd values = solver.eigenvalues().reverse();
    Eigen::MatrixXd vectors = solver.eigenvectors().rowwise().reverse();
    for (Eigen::Index i = 0; i < p; ++i) values[i] = std::max(values[i], 0.0);

    Projector proj;
    proj.components.resize(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
        Eigen::VectorXd axis = vectors.col(i);
        Eigen::Index pivot = 0;
        for (Eigen::Index j = 1; j < p; ++j)
            if (std::abs(axis[j]) > std::abs(axis[pivot])) pivot = j;
        if (axis[pivot] < 0.0) axis = -axis;
        proj.components.row(i) = axis.transpose();
    }

    const double total = values.sum();
    proj.explained_ratio.resize(p);
    if (total > 0.0) {
        proj.explained_ratio = values / total;
    } else {
        proj.explained_ratio.setZero();
        proj.explained_ratio[0] = 1.0;
    }

    double cumulative = 0.0;
    proj.retained = static_cast<std::size_t>(p);
    for (Eigen::Index i = 0; i < p; ++i) {
        cumulative += proj.explained_ratio[i];
        if (cumulative >= cumvar_target - 1e-12) {
            proj.retained = static_cast<std::size_t>(i + 1);
            break;
        }
    }
    return proj;
}

}  // namespace iotmon
