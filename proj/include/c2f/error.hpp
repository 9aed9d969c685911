#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace c2f {

/// Error categories. Each maps to a distinct CLI exit code.
enum class Errc {
    invalid_argument,
    dimension_mismatch,
    non_finite,
    io_failure,
    bad_magic,
    bad_version,
    truncated,
    magic_dims_mismatch,
    divergence,
};

inline std::string_view errc_name(Errc e) {
    switch (e) {
        case Errc::invalid_argument: return "invalid_argument";
        case Errc::dimension_mismatch: return "dimension_mismatch";
        case Errc::non_finite: return "non_finite";
        case Errc::io_failure: return "io_failure";
        case Errc::bad_magic: return "bad_magic";
        case Errc::bad_version: return "bad_version";
        case Errc::truncated: return "truncated";
        case Errc::magic_dims_mismatch: return "magic_dims_mismatch";
        case Errc::divergence: return "divergence";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

namespace detail {

inline void require(bool cond, Errc code, const std::string& msg) {
    if (!cond) throw Error(code, msg);
}

}  // namespace detail

}  // namespace c2f
