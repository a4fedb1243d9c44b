#pragma once

#include <stdexcept>
#include <string>

namespace ppts {

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct invalid_domain_error : error { using error::error; };
struct out_of_domain_error : error { using error::error; };
struct index_error : error { using error::error; };
struct dimension_error : error { using error::error; };
struct config_error : error { using error::error; };
struct singular_error : error { using error::error; };
struct not_converged_error : error { using error::error; };

struct parse_error : error {
    long line;
    parse_error(long at, const std::string& what)
        : error("line " + std::to_string(at) + ": " + what), line(at) {}
};

}  // namespace ppts
