#pragma once

#include <stdexcept>
#include <string>

namespace airfc {

// Operations throw standard exception types where one fits (std::invalid_argument,
// std::out_of_range). The subclasses below name the domain-specific failure kinds.

struct shape_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct unsupported_model : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct resource_limit : std::length_error {
    using std::length_error::length_error;
};

struct undefined_metric : std::domain_error {
    using std::domain_error::domain_error;
};

}  // namespace airfc
