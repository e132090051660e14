#ifndef LEAKYWIRE_ERROR_HPP
#define LEAKYWIRE_ERROR_HPP

#include <stdexcept>
#include <string>
#include <utility>

namespace leakywire {

/// Base class for everything the library throws. The CLI maps the
/// category to its exit code: configuration -> 2, everything else -> 3.
class error : public std::runtime_error {
public:
    enum class category { configuration, numerical, contract };

    error(category c, const std::string& what) : std::runtime_error(what), category_(c) {}

    category kind() const noexcept { return category_; }

private:
    category category_;
};

/// Invalid input or an inconsistent setup (bad field, grid mismatch, ...).
class config_error : public error {
public:
    explicit config_error(const std::string& what) : error(category::configuration, what) {}
};

/// Curve fails a geometric hypothesis. Carries the parameter location.
class geometry_error : public config_error {
public:
    geometry_error(const std::string& what, double where)
        : config_error(what + " (at parameter " + std::to_string(where) + ")"), where_(where) {}

    double where() const noexcept { return where_; }

private:
    double where_;
};

class numeric_error : public error {
public:
    explicit numeric_error(const std::string& what) : error(category::numerical, what) {}
};

/// A matrix is too close to singular; the smallest singular value is kept
/// because near a bound state this is the interesting number.
class singular_error : public numeric_error {
public:
    singular_error(const std::string& what, double sigma_min)
        : numeric_error(what + " (sigma_min = " + std::to_string(sigma_min) + ")"), sigma_min_(sigma_min) {}

    double sigma_min() const noexcept { return sigma_min_; }

private:
    double sigma_min_;
};

/// Quadrature or extrapolation did not reach the requested accuracy.
class accuracy_error : public numeric_error {
public:
    accuracy_error(const std::string& what, double estimate, double error_estimate)
        : numeric_error(what), estimate_(estimate), error_estimate_(error_estimate) {}

    double estimate() const noexcept { return estimate_; }
    double error_estimate() const noexcept { return error_estimate_; }

private:
    double estimate_;
    double error_estimate_;
};

/// Caller broke an operation's precondition.
class contract_error : public error {
public:
    explicit contract_error(const std::string& what) : error(category::contract, what) {}
};

} // namespace leakywire

#endif
