#include "dpgrpo/errors.hpp"

namespace dpgrpo {

ParseError::ParseError(std::size_t line, const std::string& what)
    : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

DivergenceError::DivergenceError(std::size_t step, const std::string& what)
    : Error("diverged at step " + std::to_string(step) + ": " + what), step_(step) {}

}  // namespace dpgrpo
