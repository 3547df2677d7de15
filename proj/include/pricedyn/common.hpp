#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pricedyn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Every stochastic component takes an explicit engine; runs are reproducible
// within one build, not across standard library implementations.
using Rng = std::mt19937_64;

// Zero-based alternative indices, one entry per group.
using Groups = std::vector<std::vector<int>>;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad argument or configuration value.
class ParameterError : public Error {
public:
    using Error::Error;
};

class IndexError : public Error {
public:
    using Error::Error;
};

// Instance data breaks a model invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

// Raised when a method needs the Lipschitz gradient bound but some supplier has gamma = 0.
class NonSmoothError : public Error {
public:
    using Error::Error;
};

}  // namespace pricedyn
