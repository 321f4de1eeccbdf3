#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace gtw {

/** Broad failure classes. The CLI maps each class onto a process exit code. */
enum class ErrorCode {
    config,               ///< malformed input, schema or parse problems
    inadmissible,         ///< state outside the model's admissible set
    complex_eigenvalues,  ///< A(U) is not hyperbolic at U
    degenerate_speeds,    ///< strict hyperbolicity violated
    sub_shock,            ///< lambda^i = s with non-vanishing source projection
    compatibility,        ///< compatibility / structural condition violated
    integration,          ///< ODE failure, blowup, chart inversion
    crossing,             ///< characteristics crossed (gradient catastrophe)
    domain,               ///< query outside the constructed solution domain
    cfl,                  ///< explicit scheme stability constraint violated
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorCode::config, what) {}
};

/** Raised with the location of the first malformed token. */
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error(ErrorCode::config, "line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class InadmissibleState : public Error {
public:
    explicit InadmissibleState(const std::string& what) : Error(ErrorCode::inadmissible, what) {}
};

class ComplexEigenvalues : public Error {
public:
    explicit ComplexEigenvalues(const std::string& what)
        : Error(ErrorCode::complex_eigenvalues, what) {}
};

class DegenerateSpeeds : public Error {
public:
    DegenerateSpeeds(std::size_t i, std::size_t j, double gap)
        : Error(ErrorCode::degenerate_speeds,
                "characteristic speeds " + std::to_string(i) + " and " + std::to_string(j) +
                    " coincide (gap " + std::to_string(gap) + ")"),
          first(i), second(j) {}
    std::size_t first, second;
};

class SubShockSingularity : public Error {
public:
    SubShockSingularity(std::size_t fam, Eigen::VectorXd at, const std::string& what)
        : Error(ErrorCode::sub_shock, what), family(fam), state(std::move(at)) {}
    std::size_t family;
    Eigen::VectorXd state;
    double x = 0.0, t = 0.0;  ///< location in the (x,t) plane when known
    bool located = false;
};

class CompatibilityViolation : public Error {
public:
    CompatibilityViolation(double magnitude, const std::string& what)
        : Error(ErrorCode::compatibility, what), residual(magnitude) {}
    double residual;
};

class IntegrationFailure : public Error {
public:
    explicit IntegrationFailure(const std::string& what) : Error(ErrorCode::integration, what) {}
};

class ProfileBlowup : public IntegrationFailure {
public:
    explicit ProfileBlowup(const std::string& what) : IntegrationFailure(what) {}
};

class ChartInversionFailure : public IntegrationFailure {
public:
    explicit ChartInversionFailure(const std::string& what) : IntegrationFailure(what) {}
};

class QuadratureFailure : public IntegrationFailure {
public:
    explicit QuadratureFailure(const std::string& what) : IntegrationFailure(what) {}
};

class SonicPoint : public Error {
public:
    SonicPoint(double sigma, const std::string& what) : Error(ErrorCode::sub_shock, what), at(sigma) {}
    double at;
};

class CharacteristicCrossing : public Error {
public:
    CharacteristicCrossing(double time, const std::string& what)
        : Error(ErrorCode::crossing, what), crossing_time(time) {}
    double crossing_time;
};

class InitialDataViolatesConstraints : public Error {
public:
    InitialDataViolatesConstraints(double magnitude, double where, const std::string& what)
        : Error(ErrorCode::compatibility, what), residual(magnitude), x(where) {}
    double residual;
    double x;
};

class NotDecoupled : public Error {
public:
    explicit NotDecoupled(const std::string& what) : Error(ErrorCode::compatibility, what) {}
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(ErrorCode::domain, what) {}
};

class PostBreakingQuery : public Error {
public:
    PostBreakingQuery(double breaking, const std::string& what)
        : Error(ErrorCode::crossing, what), breaking_time(breaking) {}
    double breaking_time;
};

class CFLViolation : public Error {
public:
    explicit CFLViolation(const std::string& what) : Error(ErrorCode::cfl, what) {}
};

}  // namespace gtw
