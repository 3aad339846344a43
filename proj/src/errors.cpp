#include "garment/errors.hpp"

namespace garment {

ParseError::ParseError(const std::string& file, int line, const std::string& what)
    : DataError(file + ":" + std::to_string(line) + ": " + what), line_(line) {}

const char* category_name(ErrorCategory category) noexcept {
    switch (category) {
        case ErrorCategory::Config: return "config";
        case ErrorCategory::Data: return "data";
        case ErrorCategory::Numerical: return "numerical";
    }
    return "unknown";
}

}  // namespace garment
