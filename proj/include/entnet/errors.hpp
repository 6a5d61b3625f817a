#pragma once

#include <stdexcept>
#include <string>

namespace entnet {

// Base class for everything this library throws on purpose.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A numeric argument is outside its documented range.
class domain_error : public error {
public:
    using error::error;
};

// An estimator was asked for a value it cannot define (e.g. zero counts).
class undefined_estimate_error : public error {
public:
    using error::error;
};

// Count data is missing pieces a computation requires.
class incomplete_data_error : public error {
public:
    using error::error;
};

// Least-squares fit degenerated (non-positive offset, singular system).
class fit_failure_error : public error {
public:
    using error::error;
};

// Code construction did not converge within its retry budget.
class construction_error : public error {
public:
    using error::error;
};

// A QKD session stopped at a security gate. `stage()` names the gate.
class session_abort_error : public error {
public:
    session_abort_error(const std::string& stage, const std::string& what)
        : error(what), stage_(stage) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

// QBER estimate at or above the abort threshold; carries the measured rate.
class qber_abort_error : public session_abort_error {
public:
    qber_abort_error(double gamma, const std::string& what)
        : session_abort_error("qber", what), gamma_(gamma) {}
    double gamma() const noexcept { return gamma_; }

private:
    double gamma_ = 0.0;
};

// CHSH check did not certify a violation.
class chsh_abort_error : public session_abort_error {
public:
    explicit chsh_abort_error(const std::string& what)
        : session_abort_error("chsh", what) {}
};

// Privacy amplification would produce a non-positive key length.
class insufficient_key_error : public error {
public:
    using error::error;
};

// Not enough unconsumed key bits for the requested pad.
class key_exhausted_error : public error {
public:
    using error::error;
};

// A one-time pad was presented twice. Hard failure.
class pad_reuse_error : public error {
public:
    using error::error;
};

// A party broke the message protocol (duplicate, unknown sender, bad round).
class protocol_violation_error : public error {
public:
    using error::error;
};

// Channel used after close, or the peer went away.
class channel_closed_error : public error {
public:
    using error::error;
};

// Filesystem or socket trouble.
class io_error : public error {
public:
    using error::error;
};

// Bad command line or configuration content.
class usage_error : public error {
public:
    using error::error;
};

}  // namespace entnet
