#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace otke {

using Scalar = double;
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
using Index = Eigen::Index;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
    using Error::Error;
};
struct NonFinite : Error {
    using Error::Error;
};
struct TooLarge : Error {
    using Error::Error;
};
struct InsufficientData : Error {
    using Error::Error;
};
struct EmptySet : Error {
    using Error::Error;
};
struct EmptyCluster : Error {
    using Error::Error;
};
struct EmptyDataset : Error {
    using Error::Error;
};
struct ParseError : Error {
    using Error::Error;
};
struct InconsistentDimension : Error {
    using Error::Error;
};
struct EmptySample : Error {
    using Error::Error;
};
struct UnknownToken : Error {
    using Error::Error;
};
struct SequenceTooShort : Error {
    using Error::Error;
};

}  // namespace otke
