// Copyright 2026 The qradapt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace qradapt {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shape or membership violation: mismatched lengths, values outside the search space.
class StructuralError : public Error {
public:
    using Error::Error;
};

// Malformed or unexpected traffic on the evaluator wire protocol.
class ProtocolError : public Error {
public:
    using Error::Error;
};

// A single evaluation failed (evaluator error response, timeout, dead connection).
// The search records the individual as failed and continues.
class EvaluationError : public Error {
public:
    using Error::Error;
};

class TimeoutError : public EvaluationError {
public:
    using EvaluationError::EvaluationError;
};

class BudgetError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

} // namespace qradapt
