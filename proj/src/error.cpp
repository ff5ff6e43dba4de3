// SPDX-License-Identifier: Apache-2.0
#include "mpiq/error.hpp"

namespace mpiq {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::Ok: return "Ok";
        case ErrorCode::Config: return "ConfigError";
        case ErrorCode::Resource: return "ResourceError";
        case ErrorCode::Allocation: return "AllocationError";
        case ErrorCode::Address: return "AddressError";
        case ErrorCode::Size: return "SizeError";
        case ErrorCode::Protocol: return "ProtocolError";
        case ErrorCode::Version: return "VersionError";
        case ErrorCode::IncompleteFrame: return "IncompleteFrame";
        case ErrorCode::Timeout: return "TimeoutError";
        case ErrorCode::Connect: return "ConnectError";
        case ErrorCode::ChannelClosed: return "ChannelClosed";
        case ErrorCode::Init: return "InitError";
        case ErrorCode::State: return "StateError";
        case ErrorCode::Launch: return "LaunchError";
        case ErrorCode::QubitRange: return "QubitRangeError";
        case ErrorCode::Truncation: return "TruncationError";
        case ErrorCode::Shape: return "ShapeError";
        case ErrorCode::Mapping: return "MappingError";
        case ErrorCode::Flag: return "FlagError";
        case ErrorCode::BarrierTimeout: return "BarrierTimeout";
        case ErrorCode::Integrity: return "IntegrityError";
        case ErrorCode::Decode: return "DecodeError";
        case ErrorCode::Range: return "RangeError";
        case ErrorCode::Capacity: return "CapacityError";
        case ErrorCode::Reconstruction: return "ReconstructionError";
        case ErrorCode::Io: return "IoError";
        case ErrorCode::Collective: return "CollectiveError";
    }
    return "UnknownError";
}

void throw_error(ErrorCode code, const std::string& what) {
    switch (code) {
        case ErrorCode::Config: throw ConfigError(what);
        case ErrorCode::Resource: throw ResourceError(what);
        case ErrorCode::Allocation: throw AllocationError(what);
        case ErrorCode::Address: throw AddressError(what);
        case ErrorCode::Size: throw SizeError(what);
        case ErrorCode::Protocol: throw ProtocolError(what);
        case ErrorCode::Version: throw VersionError(what);
        case ErrorCode::IncompleteFrame: throw IncompleteFrame(what);
        case ErrorCode::Timeout: throw TimeoutError(what);
        case ErrorCode::Connect: throw ConnectError(what);
        case ErrorCode::ChannelClosed: throw ChannelClosed(what);
        case ErrorCode::State: throw StateError(what);
        case ErrorCode::Launch: throw LaunchError(what);
        case ErrorCode::QubitRange: throw QubitRangeError(what);
        case ErrorCode::Truncation: throw TruncationError(what);
        case ErrorCode::Shape: throw ShapeError(what);
        case ErrorCode::Mapping: throw MappingError(what);
        case ErrorCode::Flag: throw FlagError(what);
        case ErrorCode::Integrity: throw IntegrityError(what);
        case ErrorCode::Decode: throw DecodeError(what);
        case ErrorCode::Range: throw RangeError(what);
        case ErrorCode::Capacity: throw CapacityError(what);
        case ErrorCode::Reconstruction: throw ReconstructionError(what);
        case ErrorCode::Io: throw IoError(what);
        default: throw Error(code, what);
    }
}

}  // namespace mpiq
