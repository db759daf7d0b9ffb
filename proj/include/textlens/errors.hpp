#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace textlens {

// Malformed input data (delimited files, JSON corpora, model payloads).
// line is 1-based; 0 means the error is not tied to a specific line.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg, std::size_t line = 0)
        : std::runtime_error(line ? msg + " (line " + std::to_string(line) + ")" : msg),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Model file failed version or shape validation.
class ModelFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss.
class DivergedError : public std::runtime_error {
public:
    DivergedError(long long step, double loss)
        : std::runtime_error("non-finite training loss at step " + std::to_string(step) +
                             " (loss: " + std::to_string(loss) + ")"),
          step_(step), loss_(loss) {}

    long long step() const noexcept { return step_; }
    double loss() const noexcept { return loss_; }

private:
    long long step_;
    double loss_;
};

// Input text reduced to nothing after normalization.
class EmptyInputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ExplainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace textlens
