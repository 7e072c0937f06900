#pragma once

#include <cstdint>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace duskforge {

// Contract violations and bad inputs. `what()` carries the full diagnostic;
// the CLI maps ValidationError to exit code 1 and everything else to 2.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& msg) : Error(msg) {}
};

// Raised when a similarity loss sees a (near-)zero feature norm.
class CollapseError : public Error {
public:
    explicit CollapseError(const std::string& msg) : Error(msg) {}
};

namespace detail {
inline void format_into(std::ostringstream&) {}
template <typename Head, typename... Tail>
void format_into(std::ostringstream& os, const Head& h, const Tail&... t) {
    os << h;
    format_into(os, t...);
}
} // namespace detail

template <typename... Args>
std::string format_msg(const Args&... args) {
    std::ostringstream os;
    detail::format_into(os, args...);
    return os.str();
}

#define DUSK_CHECK(cond, ...)                                              \
    do {                                                                   \
        if (!(cond)) throw ::duskforge::Error(::duskforge::format_msg(__VA_ARGS__)); \
    } while (0)

inline std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

// Worker-thread cap shared by the few parallel loops in the project.
// DUSKFORGE_THREADS=N limits it; unset means hardware concurrency.
int worker_threads();

} // namespace duskforge
