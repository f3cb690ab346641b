#pragma once

#include <stdexcept>
#include <string>

namespace fgtt {

// shape/contract/config errors flag caller bugs; data errors come from user
// inputs; train errors from optimization at runtime.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct shape_error : error {
    using error::error;
};

struct contract_error : error {
    using error::error;
};

struct config_error : error {
    using error::error;
};

struct data_error : error {
    using error::error;
};

struct train_error : error {
    using error::error;
};

}  // namespace fgtt
