#ifndef TABCL_TYPES_HPP
#define TABCL_TYPES_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace tabcl {

using Scalar = double;
using Index = Eigen::Index;

using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
using IntVec = Eigen::Matrix<int, Eigen::Dynamic, 1>;
using BoolVec = Eigen::Array<bool, Eigen::Dynamic, 1>;

using IndexList = std::vector<Index>;

} // namespace tabcl

#endif
