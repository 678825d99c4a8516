#ifndef QACTION_ERRORS_HPP
#define QACTION_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace qaction
{

/// Base of every error raised by the library. `code()` is a stable
/// machine-readable identifier (used verbatim in CLI error JSON).
class Error : public std::runtime_error
{
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(what), code_(std::move(code))
    {
    }

    const std::string& code() const noexcept { return code_; }

    /// Usage/config problems map to exit code 2, everything else to 1.
    virtual bool is_usage_error() const noexcept { return false; }

private:
    std::string code_;
};

class ConfigError : public Error
{
public:
    using Error::Error;
    bool is_usage_error() const noexcept override { return true; }
};

class InvalidArgument : public Error
{
public:
    explicit InvalidArgument(const std::string& what) : Error("invalid_argument", what) {}
    bool is_usage_error() const noexcept override { return true; }
};

class NumericalError : public Error
{
public:
    using Error::Error;
};

class NonConvergence : public NumericalError
{
public:
    explicit NonConvergence(const std::string& what) : NumericalError("non_convergence", what) {}
};

class BoundaryLeakage : public NumericalError
{
public:
    BoundaryLeakage(double magnitude, const std::string& what)
        : NumericalError("boundary_leakage", what), magnitude_(magnitude)
    {
    }
    double magnitude() const noexcept { return magnitude_; }

private:
    double magnitude_;
};

class ConjugatePoint : public NumericalError
{
public:
    explicit ConjugatePoint(const std::string& what) : NumericalError("conjugate_point", what) {}
};

class InstabilityError : public NumericalError
{
public:
    InstabilityError(double change, const std::string& what)
        : NumericalError("unstable_large_t", what), change_(change)
    {
    }
    double change() const noexcept { return change_; }

private:
    double change_;
};

class DomainError : public NumericalError
{
public:
    explicit DomainError(const std::string& what) : NumericalError("domain_error", what) {}
};

class SingularityError : public NumericalError
{
public:
    explicit SingularityError(const std::string& what) : NumericalError("singularity", what) {}
};

class BlowUp : public NumericalError
{
public:
    explicit BlowUp(const std::string& what) : NumericalError("blow_up", what) {}
};

class EnergyDrift : public NumericalError
{
public:
    EnergyDrift(double drift, const std::string& what) : NumericalError("energy_drift", what), drift_(drift) {}
    double drift() const noexcept { return drift_; }

private:
    double drift_;
};

class OffShellSeed : public Error
{
public:
    OffShellSeed(double deficit, const std::string& what)
        : Error("off_shell_seed", what), deficit_(deficit)
    {
    }
    double deficit() const noexcept { return deficit_; }
    bool is_usage_error() const noexcept override { return true; }

private:
    double deficit_;
};

} // namespace qaction

#endif // QACTION_ERRORS_HPP
