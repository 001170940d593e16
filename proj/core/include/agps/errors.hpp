#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace agps {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---- feature DSL ----

struct ShapeError : Error {
    std::string node_path;
    std::string reason;
    ShapeError(std::string path, std::string why)
        : Error("shape error at " + path + ": " + why),
          node_path(std::move(path)),
          reason(std::move(why)) {}
};

struct ParseError : Error {
    std::size_t offset;
    std::string expected;
    ParseError(std::size_t at, std::string what)
        : Error("parse error at offset " + std::to_string(at) + ": expected " + what),
          offset(at),
          expected(std::move(what)) {}
};

struct NumericalError : Error {
    using Error::Error;
};

struct EmptyBaseSet : Error {
    EmptyBaseSet() : Error("operant base set is empty") {}
};

// ---- grammar ----

struct SamplingExhausted : Error {
    using Error::Error;
};

struct UnknownChoice : Error {
    using Error::Error;
};

struct NonFiniteReward : Error {
    using Error::Error;
};

struct CorruptCheckpoint : Error {
    using Error::Error;
};

struct EnumerationTooLarge : Error {
    using Error::Error;
};

// ---- geometry oracle ----

struct DegenerateInput : Error {
    using Error::Error;
};

// ---- synthgen ----

struct SpecError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

struct FormatError : Error {
    std::size_t offset;
    FormatError(std::size_t at, const std::string& why)
        : Error("format error at byte " + std::to_string(at) + ": " + why), offset(at) {}
};

// ---- evaluator ----

struct MissingChannel : Error {
    using Error::Error;
};

struct DimMismatch : Error {
    using Error::Error;
};

struct NonFiniteLoss : Error {
    using Error::Error;
};

struct SupervisionError : Error {
    std::string tree;
    std::string cause;
    SupervisionError(std::string tree_text, std::string why)
        : Error("supervision failed for " + tree_text + ": " + why),
          tree(std::move(tree_text)),
          cause(std::move(why)) {}
};

// ---- config / cli ----

struct ConfigError : Error {
    std::string key;
    std::string reason;
    ConfigError(std::string which, std::string why)
        : Error("config error [" + which + "]: " + why),
          key(std::move(which)),
          reason(std::move(why)) {}
};

}  // namespace agps
