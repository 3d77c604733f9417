#pragma once

#include <stdexcept>
#include <string>

namespace cabrita {

// Unusable input data: missing files, unreadable shards, bad values.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Structurally broken artifact: bad magic, schema violation, truncated payload.
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace cabrita
