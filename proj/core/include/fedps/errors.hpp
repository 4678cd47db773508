#pragma once

#include <stdexcept>
#include <string>

namespace fedps {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PartitionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidValue : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MergeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptySketch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidQuantile : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnsupportedPartition : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TransformError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PredictError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CompareError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace fedps
