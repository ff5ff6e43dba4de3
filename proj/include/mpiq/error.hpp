// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mpiq {

/// Every failure raised by the runtime carries one of these codes.
enum class ErrorCode : std::uint8_t {
    Ok = 0,
    Config,
    Resource,
    Allocation,
    Address,
    Size,
    Protocol,
    Version,
    IncompleteFrame,
    Timeout,
    Connect,
    ChannelClosed,
    Init,
    State,
    Launch,
    QubitRange,
    Truncation,
    Shape,
    Mapping,
    Flag,
    BarrierTimeout,
    Integrity,
    Decode,
    Range,
    Capacity,
    Reconstruction,
    Io,
    Collective,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

template <ErrorCode C>
class BasicError : public Error {
public:
    explicit BasicError(const std::string& what) : Error(C, what) {}
    static constexpr ErrorCode kCode = C;
};

using ConfigError = BasicError<ErrorCode::Config>;
using ResourceError = BasicError<ErrorCode::Resource>;
using AllocationError = BasicError<ErrorCode::Allocation>;
using AddressError = BasicError<ErrorCode::Address>;
using SizeError = BasicError<ErrorCode::Size>;
using ProtocolError = BasicError<ErrorCode::Protocol>;
using VersionError = BasicError<ErrorCode::Version>;
using IncompleteFrame = BasicError<ErrorCode::IncompleteFrame>;
using TimeoutError = BasicError<ErrorCode::Timeout>;
using ConnectError = BasicError<ErrorCode::Connect>;
using ChannelClosed = BasicError<ErrorCode::ChannelClosed>;
using StateError = BasicError<ErrorCode::State>;
using LaunchError = BasicError<ErrorCode::Launch>;
using QubitRangeError = BasicError<ErrorCode::QubitRange>;
using TruncationError = BasicError<ErrorCode::Truncation>;
using ShapeError = BasicError<ErrorCode::Shape>;
using MappingError = BasicError<ErrorCode::Mapping>;
using FlagError = BasicError<ErrorCode::Flag>;
using IntegrityError = BasicError<ErrorCode::Integrity>;
using DecodeError = BasicError<ErrorCode::Decode>;
using RangeError = BasicError<ErrorCode::Range>;
using CapacityError = BasicError<ErrorCode::Capacity>;
using ReconstructionError = BasicError<ErrorCode::Reconstruction>;
using IoError = BasicError<ErrorCode::Io>;

/// Throws the BasicError subtype matching `code`. Used to re-raise errors
/// that crossed the wire as (code, text) pairs.
[[noreturn]] void throw_error(ErrorCode code, const std::string& what);

}  // namespace mpiq
