#pragma once

#include <stdexcept>
#include <string>

namespace ipop::vnet {

enum class PacketErrc { Truncated, BadVersion, BadLength, BadChecksum, OddLength, Oversize, WrongType };

const char* to_string(PacketErrc code);

class PacketError : public std::runtime_error {
public:
    PacketError(PacketErrc code, const std::string& detail)
        : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code)
    {
    }
    PacketErrc code() const { return code_; }

private:
    PacketErrc code_;
};

} // namespace ipop::vnet
