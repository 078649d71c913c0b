#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ssoaudit {

// Base class for every error the analyzer reports to callers.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MalformedInput : public Error {
public:
    using Error::Error;
};

// A HAR entry that could not be read. index is the position in log.entries.
class EntryError : public Error {
public:
    EntryError(std::size_t index, const std::string& what)
        : Error("entry " + std::to_string(index) + ": " + what), index_(index) {}

    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

class MissingMetadataField : public Error {
public:
    explicit MissingMetadataField(std::string field)
        : Error("missing metadata field: " + field), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class ProfileMismatch : public Error {
public:
    using Error::Error;
};

class InvalidDomain : public Error {
public:
    explicit InvalidDomain(const std::string& domain)
        : Error("invalid domain: '" + domain + "'") {}
};

class UnknownFormat : public Error {
public:
    explicit UnknownFormat(const std::string& format)
        : Error("unknown format: '" + format + "'") {}
};

} // namespace ssoaudit
